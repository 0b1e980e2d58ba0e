//! Small numeric helpers shared by the model backends.
//!
//! Transcendentals go through `libm` so results match between std and
//! `no_std` builds of the crate.

use alloc::vec::Vec;

pub fn expf(x: f32) -> f32 {
    libm::expf(x)
}

pub fn sqrtf(x: f32) -> f32 {
    libm::sqrtf(x)
}

/// Numerically stable softmax.
pub fn softmax(logits: &[f32]) -> Vec<f32> {
    let max = logits.iter().copied().fold(f32::NEG_INFINITY, f32::max);
    let exps: Vec<f32> = logits.iter().map(|&x| expf(x - max)).collect();
    let sum: f32 = exps.iter().sum();
    exps.iter().map(|&e| e / sum).collect()
}

/// Index of the maximum value; ties resolve to the lowest index.
pub fn argmax_tie_lowest(values: &[f32]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Root mean square of a vector, floored at `eps` to keep division sane.
pub fn rms(values: &[f32], eps: f32) -> f32 {
    let ms: f32 = values.iter().map(|&v| v * v).sum::<f32>() / values.len() as f32;
    sqrtf(ms + eps)
}

/// Integer-exact ceil(rho * n) without relying on float `ceil`.
pub fn ceil_fraction(rho: f64, n: u32) -> u32 {
    let x = rho * n as f64;
    let floor = x as u32;
    if (floor as f64) < x {
        floor + 1
    } else {
        floor
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn softmax_uniform_logits() {
        let p = softmax(&[1.5, 1.5, 1.5, 1.5]);
        for &v in &p {
            assert!((v - 0.25).abs() < 1e-6);
        }
    }

    #[test]
    fn softmax_hand_computed() {
        // softmax(2, 0, 0) -> e^2 / (e^2 + 2) for the max entry.
        let p = softmax(&[2.0, 0.0, 0.0]);
        assert!((p[0] - 0.786_986_04).abs() < 1e-6);
        assert!((p[1] - p[2]).abs() < 1e-7);
        assert!((p.iter().sum::<f32>() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn argmax_breaks_ties_low() {
        assert_eq!(argmax_tie_lowest(&[0.3, 0.1, 0.3]), 0);
        assert_eq!(argmax_tie_lowest(&[0.1, 0.5, 0.5]), 1);
    }

    #[test]
    fn ceil_fraction_cases() {
        assert_eq!(ceil_fraction(0.5, 32), 16);
        assert_eq!(ceil_fraction(0.5, 12), 6);
        assert_eq!(ceil_fraction(0.51, 12), 7);
        assert_eq!(ceil_fraction(1.0, 12), 12);
        assert_eq!(ceil_fraction(0.01, 12), 1);
    }
}
