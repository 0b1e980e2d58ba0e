//! Portable deterministic random number generation.
//!
//! Weight and fixture generation must produce bitwise-identical output on
//! every platform, so this module pins the generator rather than deferring
//! to an external crate: SplitMix64 (Steele, Lea & Flood 2014) with the
//! standard constants below. Floats are derived from the top 24 bits of the
//! output word, which every IEEE-754 `f32` represents exactly.

/// SplitMix64 generator. Advances by the golden-gamma increment and
/// finalizes with the murmur-style mixer.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

/// Golden-gamma increment: floor(2^64 / phi), forced odd.
pub const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;
const MIX_MUL_1: u64 = 0xBF58_476D_1CE4_E5B9;
const MIX_MUL_2: u64 = 0x94D0_49BB_1331_11EB;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Derives an independent stream for a named purpose. Mixing the salt
    /// through one generator step decorrelates streams that share a seed.
    pub fn derive(seed: u64, salt: u64) -> Self {
        let mut base = Self::new(seed ^ salt);
        let s = base.next_u64();
        Self::new(s)
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(MIX_MUL_1);
        z = (z ^ (z >> 27)).wrapping_mul(MIX_MUL_2);
        z ^ (z >> 31)
    }

    /// Uniform in `[0, 1)` with 24 bits of precision; exact in `f32`.
    pub fn next_f32(&mut self) -> f32 {
        (self.next_u64() >> 40) as f32 / (1u32 << 24) as f32
    }

    /// Uniform in `(-scale, scale)`.
    pub fn uniform(&mut self, scale: f32) -> f32 {
        (2.0 * self.next_f32() - 1.0) * scale
    }

    /// Uniform integer in `[0, bound)`. `bound` must be nonzero.
    pub fn below(&mut self, bound: u64) -> u64 {
        // Multiply-shift range reduction; bias is < 2^-40 for desk-scale
        // bounds, and identical on every platform.
        ((self.next_u64() as u128 * bound as u128) >> 64) as u64
    }

    pub fn bernoulli(&mut self, p: f32) -> bool {
        self.next_f32() < p
    }
}
