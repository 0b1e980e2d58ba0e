//! Deterministic synthetic transformer backend.
//!
//! Pre-norm blocks (single-head self-attention over a short token sequence,
//! two-layer ReLU MLP, residual connections), mean-pooled tokens through a
//! final RMS norm into a linear head. All weights derive from the spec seed
//! via SplitMix64, so identical specs generate bitwise-identical models on
//! every platform.
//!
//! # Planted structure
//!
//! The hidden space is partitioned into lanes:
//!
//! ```text
//! [0, C)              readout lane   — the head reads class c at coord c
//! [C, 2C)             overthink lane — one-hot flip target, set only on
//!                                      over-thinking samples
//! [2C + k*C, 2C+(k+1)C) signal lane  — one-hot true class for task k
//! [2C + T*C, D)       free lane     — calibrated filler noise
//! ```
//!
//! Sample embeddings place a decoy class directly in the readout lane and
//! the true class in their task's signal lane. The MLP of the layer at a
//! task's planted depth carries an exact linear bypass (ReLU pair trick:
//! `relu(x) - relu(-x) = x`) from that signal lane into the readout lane
//! with gain `SIGNAL_GAIN`, so predictions flip from the decoy to the true
//! class exactly at the planted depth. Over-thinking samples additionally
//! carry a one-hot flip target that the final layer's bypass injects with
//! `OVERTHINK_GAIN`, flipping the prediction to a wrong label at layer L.
//!
//! Free-lane filler keeps every embedding at RMS ~= 1, which bounds the
//! norm-scaling of the injections: the decoy amplitude, signal injection,
//! and overthink injection are separated by comfortable margins (see the
//! constants below) while the random texture weights contribute orders of
//! magnitude less. Unit tests assert the resulting fidelity empirically.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample, SamplePayload};
use crate::error::{Error, Result};
use crate::math::{argmax_tie_lowest, rms, softmax, sqrtf};
use crate::model::{LabelId, LabelSet};
use crate::rng::SplitMix64;

/// Token count of the synthetic sequence.
pub const SEQ_LEN: usize = 4;
/// MLP hidden width as a multiple of the model width.
pub const MLP_EXPANSION: usize = 4;

/// Amplitude of the one-hot true class in the task signal lane.
const SIGNAL_AMP: f32 = 1.0;
/// Amplitude of the decoy class planted in the readout lane at embedding.
const DECOY_AMP: f32 = 0.5;
/// Amplitude of the one-hot flip target in the overthink lane.
const OVERTHINK_AMP: f32 = 1.0;
/// Gain of the signal-lane -> readout bypass at the planted depth. With
/// embeddings at RMS ~= 1 the injected logit lands well above DECOY_AMP.
const SIGNAL_GAIN: f32 = 2.0;
/// Gain of the overthink-lane -> readout bypass at the final layer. Must
/// dominate the signal injection even after the residual norm grows;
/// worst-case norm growth at minimal widths stays under 1.8x.
const OVERTHINK_GAIN: f32 = 24.0;
/// Scale applied by the head to readout coordinates.
const HEAD_GAIN: f32 = 2.0;
const RMS_EPS: f32 = 1e-12;

const WEIGHT_SALT: u64 = 0x5745_4947_4854_5331; // "WEIGHTS1"
const DATA_SALT: u64 = 0x4441_5441_5345_5431; // "DATASET1"

/// Generation parameters for a synthetic transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTransformerSpec {
    pub hidden_dim: u32,
    pub num_layers: u32,
    pub num_classes: u32,
    pub seed: u64,
    /// Layer at which each task's samples become decodable as their true
    /// class. Tasks absent from the map do not appear in generated datasets.
    pub planted_depths: BTreeMap<String, u32>,
    /// Fraction of samples whose prediction flips to a wrong label at the
    /// final layer after stabilizing.
    pub overthink_rate: f32,
}

impl SyntheticTransformerSpec {
    /// Minimum hidden width for this spec's lane layout.
    pub fn min_hidden_dim(&self) -> u32 {
        let c = self.num_classes;
        let t = self.planted_depths.len() as u32;
        (2 + t) * c + 4
    }

    pub fn validate(&self) -> Result<()> {
        let mut bad: Vec<String> = Vec::new();
        if self.num_layers < 1 {
            bad.push("num_layers must be >= 1".to_string());
        }
        if self.num_classes < 2 {
            bad.push("num_classes must be >= 2".to_string());
        }
        if self.num_classes > u16::MAX as u32 {
            bad.push("num_classes exceeds label width".to_string());
        }
        if self.hidden_dim < self.min_hidden_dim() {
            bad.push(format!(
                "hidden_dim {} below minimum {} for {} classes and {} planted tasks",
                self.hidden_dim,
                self.min_hidden_dim(),
                self.num_classes,
                self.planted_depths.len()
            ));
        }
        if !(0.0..=1.0).contains(&self.overthink_rate) {
            bad.push(format!(
                "overthink_rate {} outside [0, 1]",
                self.overthink_rate
            ));
        }
        for (task, depth) in &self.planted_depths {
            if task.is_empty() {
                bad.push("planted_depths contains an empty task id".to_string());
            }
            if *depth < 1 || *depth > self.num_layers {
                bad.push(format!(
                    "planted depth {depth} for task '{task}' outside [1, {}]",
                    self.num_layers
                ));
            }
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::SpecValidation(bad))
        }
    }
}

/// One transformer block's weights, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockWeights {
    pub wq: Vec<f32>,
    pub wk: Vec<f32>,
    pub wv: Vec<f32>,
    pub wo: Vec<f32>,
    pub w1: Vec<f32>, // [mlp_dim x hidden]
    pub w2: Vec<f32>, // [hidden x mlp_dim]
}

/// Generated synthetic transformer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTransformer {
    spec: SyntheticTransformerSpec,
    labels: LabelSet,
    pos: Vec<f32>,  // [SEQ_LEN x hidden]
    head: Vec<f32>, // [classes x hidden]
    blocks: Vec<BlockWeights>,
}

/// Lane coordinate helpers for a given class count.
#[derive(Debug, Clone, Copy)]
struct Lanes {
    classes: usize,
    tasks: usize,
}

impl Lanes {
    fn readout(&self, class: usize) -> usize {
        class
    }
    fn overthink(&self, class: usize) -> usize {
        self.classes + class
    }
    fn signal(&self, task_index: usize, class: usize) -> usize {
        2 * self.classes + task_index * self.classes + class
    }
    fn free_start(&self) -> usize {
        (2 + self.tasks) * self.classes
    }
}

impl SyntheticTransformer {
    /// Generates weights from the spec. Fill order is fixed (positional
    /// embeddings, then per layer Wq, Wk, Wv, Wo, W1, W2, then the head)
    /// followed by the planted overlays, so regeneration is byte-stable.
    pub fn generate(spec: SyntheticTransformerSpec) -> Result<Self> {
        Self::generate_with_labels(spec, None)
    }

    pub fn generate_with_labels(
        spec: SyntheticTransformerSpec,
        label_names: Option<Vec<String>>,
    ) -> Result<Self> {
        spec.validate()?;
        let d = spec.hidden_dim as usize;
        let m = d * MLP_EXPANSION;
        let c = spec.num_classes as usize;
        let lanes = Lanes {
            classes: c,
            tasks: spec.planted_depths.len(),
        };

        let labels = match label_names {
            Some(names) => {
                if names.len() != c {
                    return Err(Error::SpecValidation(vec![format!(
                        "label_names has {} entries, expected {}",
                        names.len(),
                        c
                    )]));
                }
                LabelSet::new(names)
            }
            None => LabelSet::new((0..c).map(|i| format!("class-{i}")).collect()),
        };

        let qk_scale = 0.5 / sqrtf(d as f32);
        let vo_scale = 0.08 / sqrtf(d as f32);
        let w1_scale = 0.15 / sqrtf(d as f32);
        let w2_scale = 0.08 / sqrtf(m as f32);
        let pos_scale = 0.02;
        let head_noise = 1e-3 / sqrtf(d as f32);

        let mut rng = SplitMix64::derive(spec.seed, WEIGHT_SALT);
        let fill = |n: usize, scale: f32, rng: &mut SplitMix64| -> Vec<f32> {
            (0..n).map(|_| rng.uniform(scale)).collect()
        };

        let pos = fill(SEQ_LEN * d, pos_scale, &mut rng);
        let mut blocks = Vec::with_capacity(spec.num_layers as usize);
        for _ in 0..spec.num_layers {
            blocks.push(BlockWeights {
                wq: fill(d * d, qk_scale, &mut rng),
                wk: fill(d * d, qk_scale, &mut rng),
                wv: fill(d * d, vo_scale, &mut rng),
                wo: fill(d * d, vo_scale, &mut rng),
                w1: fill(m * d, w1_scale, &mut rng),
                w2: fill(d * m, w2_scale, &mut rng),
            });
        }

        // Head: class c reads its readout coordinate, plus trace noise on
        // the free lane so logits are not exactly degenerate.
        let mut head = vec![0.0f32; c * d];
        for class in 0..c {
            head[class * d + lanes.readout(class)] = HEAD_GAIN;
            for coord in lanes.free_start()..d {
                head[class * d + coord] = rng.uniform(head_noise);
            }
        }

        // Planted overlays. Tasks iterate in sorted order (BTreeMap).
        for (layer_idx, block) in blocks.iter_mut().enumerate() {
            let layer = layer_idx as u32 + 1;
            let mut unit = 0usize;
            for (task_index, (_task, depth)) in spec.planted_depths.iter().enumerate() {
                if *depth == layer {
                    for class in 0..c {
                        plant_edge(
                            block,
                            d,
                            m,
                            &mut unit,
                            lanes.signal(task_index, class),
                            lanes.readout(class),
                            SIGNAL_GAIN,
                        );
                    }
                }
            }
            if layer == spec.num_layers {
                for class in 0..c {
                    plant_edge(
                        block,
                        d,
                        m,
                        &mut unit,
                        lanes.overthink(class),
                        lanes.readout(class),
                        OVERTHINK_GAIN,
                    );
                }
            }
            debug_assert!(unit <= m, "planted units exceed MLP width");
        }

        Ok(Self {
            spec,
            labels,
            pos,
            head,
            blocks,
        })
    }

    /// Rebuilds a model from stored weights (e.g. a model file) without
    /// regenerating from the seed. Array lengths must match the spec.
    pub fn from_parts(
        spec: SyntheticTransformerSpec,
        label_names: Vec<String>,
        pos: Vec<f32>,
        head: Vec<f32>,
        blocks: Vec<BlockWeights>,
    ) -> Result<Self> {
        spec.validate()?;
        let d = spec.hidden_dim as usize;
        let m = d * MLP_EXPANSION;
        let c = spec.num_classes as usize;
        let mut bad = Vec::new();
        if label_names.len() != c {
            bad.push(format!("{} labels, expected {c}", label_names.len()));
        }
        if pos.len() != SEQ_LEN * d {
            bad.push(format!("pos has {} values, expected {}", pos.len(), SEQ_LEN * d));
        }
        if head.len() != c * d {
            bad.push(format!("head has {} values, expected {}", head.len(), c * d));
        }
        if blocks.len() != spec.num_layers as usize {
            bad.push(format!(
                "{} blocks, expected {}",
                blocks.len(),
                spec.num_layers
            ));
        }
        for (i, b) in blocks.iter().enumerate() {
            for (name, arr, want) in [
                ("wq", &b.wq, d * d),
                ("wk", &b.wk, d * d),
                ("wv", &b.wv, d * d),
                ("wo", &b.wo, d * d),
                ("w1", &b.w1, m * d),
                ("w2", &b.w2, d * m),
            ] {
                if arr.len() != want {
                    bad.push(format!(
                        "block {i} {name} has {} values, expected {want}",
                        arr.len()
                    ));
                }
            }
        }
        if !bad.is_empty() {
            return Err(Error::SpecValidation(bad));
        }
        Ok(Self {
            spec,
            labels: LabelSet::new(label_names),
            pos,
            head,
            blocks,
        })
    }

    pub fn spec(&self) -> &SyntheticTransformerSpec {
        &self.spec
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn hidden_dim(&self) -> usize {
        self.spec.hidden_dim as usize
    }

    pub fn pos_weights(&self) -> &[f32] {
        &self.pos
    }

    pub fn head_weights(&self) -> &[f32] {
        &self.head
    }

    pub fn block_weights(&self) -> &[BlockWeights] {
        &self.blocks
    }

    /// Embeds a feature vector into the token-major state.
    pub fn embed(&self, features: &[f32]) -> Result<Vec<f32>> {
        let d = self.hidden_dim();
        if features.len() != d {
            return Err(Error::InputShape {
                expected: d,
                got: features.len(),
            });
        }
        let mut state = vec![0.0f32; SEQ_LEN * d];
        for t in 0..SEQ_LEN {
            for i in 0..d {
                state[t * d + i] = features[i] + self.pos[t * d + i];
            }
        }
        Ok(state)
    }

    /// Applies block `layer` (1-based) in place to a token-major state.
    pub fn apply_block(&self, state: &mut [f32], layer: u32) -> Result<()> {
        let d = self.hidden_dim();
        if layer == 0 || layer > self.spec.num_layers {
            return Err(Error::LayerIndex {
                layer,
                num_layers: self.spec.num_layers,
            });
        }
        let block = &self.blocks[(layer - 1) as usize];
        let m = d * MLP_EXPANSION;

        // Attention sublayer (pre-norm).
        let mut normed = vec![0.0f32; SEQ_LEN * d];
        for t in 0..SEQ_LEN {
            let tok = &state[t * d..(t + 1) * d];
            let r = rms(tok, RMS_EPS);
            for i in 0..d {
                normed[t * d + i] = tok[i] / r;
            }
        }
        let mut q = vec![0.0f32; SEQ_LEN * d];
        let mut k = vec![0.0f32; SEQ_LEN * d];
        let mut v = vec![0.0f32; SEQ_LEN * d];
        for t in 0..SEQ_LEN {
            matvec(&block.wq, &normed[t * d..(t + 1) * d], &mut q[t * d..(t + 1) * d]);
            matvec(&block.wk, &normed[t * d..(t + 1) * d], &mut k[t * d..(t + 1) * d]);
            matvec(&block.wv, &normed[t * d..(t + 1) * d], &mut v[t * d..(t + 1) * d]);
        }
        let inv_sqrt_d = 1.0 / sqrtf(d as f32);
        let mut ctx = vec![0.0f32; d];
        let mut proj = vec![0.0f32; d];
        for t in 0..SEQ_LEN {
            let mut scores = [0.0f32; SEQ_LEN];
            for (s, score) in scores.iter_mut().enumerate() {
                *score = dot(&q[t * d..(t + 1) * d], &k[s * d..(s + 1) * d]) * inv_sqrt_d;
            }
            let weights = softmax(&scores);
            ctx.iter_mut().for_each(|x| *x = 0.0);
            for (s, &w) in weights.iter().enumerate() {
                for i in 0..d {
                    ctx[i] += w * v[s * d + i];
                }
            }
            matvec(&block.wo, &ctx, &mut proj);
            for i in 0..d {
                state[t * d + i] += proj[i];
            }
        }

        // MLP sublayer (pre-norm, two layers, ReLU).
        let mut hidden = vec![0.0f32; m];
        let mut tok_norm = vec![0.0f32; d];
        for t in 0..SEQ_LEN {
            let tok = &state[t * d..(t + 1) * d];
            let r = rms(tok, RMS_EPS);
            for i in 0..d {
                tok_norm[i] = tok[i] / r;
            }
            for (row, h) in hidden.iter_mut().enumerate() {
                let z = dot(&block.w1[row * d..(row + 1) * d], &tok_norm);
                *h = if z > 0.0 { z } else { 0.0 };
            }
            for i in 0..d {
                state[t * d + i] += dot(&block.w2[i * m..(i + 1) * m], &hidden);
            }
        }
        Ok(())
    }

    /// Shared head: mean-pool tokens, final RMS norm, linear readout.
    pub fn head(&self, state: &[f32]) -> (LabelId, f32) {
        let d = self.hidden_dim();
        let c = self.spec.num_classes as usize;
        let mut pooled = vec![0.0f32; d];
        for t in 0..SEQ_LEN {
            for i in 0..d {
                pooled[i] += state[t * d + i];
            }
        }
        pooled.iter_mut().for_each(|x| *x /= SEQ_LEN as f32);
        let r = rms(&pooled, RMS_EPS);
        pooled.iter_mut().for_each(|x| *x /= r);

        let mut logits = vec![0.0f32; c];
        for (class, logit) in logits.iter_mut().enumerate() {
            *logit = dot(&self.head[class * d..(class + 1) * d], &pooled);
        }
        let probs = softmax(&logits);
        let best = argmax_tie_lowest(&logits);
        (LabelId(best as u16), probs[best])
    }
}

/// Installs an exact linear bypass `target += gain * source` in a block's
/// MLP using a ReLU pair. Claims two hidden units.
fn plant_edge(
    block: &mut BlockWeights,
    d: usize,
    m: usize,
    unit: &mut usize,
    source: usize,
    target: usize,
    gain: f32,
) {
    for sign in [1.0f32, -1.0] {
        let row = *unit;
        for i in 0..d {
            block.w1[row * d + i] = 0.0;
        }
        block.w1[row * d + source] = sign;
        for r in 0..d {
            block.w2[r * m + row] = 0.0;
        }
        block.w2[target * m + row] = sign * gain;
        *unit += 1;
    }
}

fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn matvec(mat: &[f32], x: &[f32], out: &mut [f32]) {
    let d = x.len();
    for (row, o) in out.iter_mut().enumerate() {
        *o = dot(&mat[row * d..(row + 1) * d], x);
    }
}

/// Generates the labeled dataset matching a synthetic spec: for each planted
/// task, `samples_per_task` samples whose features carry the lane structure
/// described in the module docs. Deterministic in the spec seed; sample ids
/// are assigned sequentially across tasks in sorted task order.
pub fn generate_synthetic_dataset(
    spec: &SyntheticTransformerSpec,
    samples_per_task: u32,
) -> Result<Dataset> {
    spec.validate()?;
    if samples_per_task == 0 {
        return Err(Error::SpecValidation(vec![
            "samples_per_task must be >= 1".to_string(),
        ]));
    }
    let d = spec.hidden_dim as usize;
    let c = spec.num_classes as usize;
    let lanes = Lanes {
        classes: c,
        tasks: spec.planted_depths.len(),
    };
    let free = d - lanes.free_start();

    let mut rng = SplitMix64::derive(spec.seed, DATA_SALT);
    let mut samples = Vec::with_capacity(spec.planted_depths.len() * samples_per_task as usize);
    let mut next_id = 0u64;

    for (task_index, (task, _depth)) in spec.planted_depths.iter().enumerate() {
        for _ in 0..samples_per_task {
            let truth = rng.below(c as u64) as usize;
            let decoy = (truth + 1 + rng.below(c as u64 - 1) as usize) % c;
            let overthink = rng.bernoulli(spec.overthink_rate);
            let flip = (truth + 1 + rng.below(c as u64 - 1) as usize) % c;

            let mut features = vec![0.0f32; d];
            features[lanes.signal(task_index, truth)] = SIGNAL_AMP;
            features[lanes.readout(decoy)] = DECOY_AMP;
            let mut planted_ms = SIGNAL_AMP * SIGNAL_AMP + DECOY_AMP * DECOY_AMP;
            if overthink {
                features[lanes.overthink(flip)] = OVERTHINK_AMP;
                planted_ms += OVERTHINK_AMP * OVERTHINK_AMP;
            }
            // Calibrated filler: totals the mean square to ~1 so injection
            // margins hold independent of hidden width.
            let target = (d as f32 - planted_ms).max(0.0) / free as f32;
            let amp = sqrtf(3.0 * target);
            for coord in lanes.free_start()..d {
                features[coord] = rng.uniform(amp);
            }

            samples.push(Sample {
                sample_id: next_id,
                task_id: task.clone(),
                ground_truth: LabelId(truth as u16),
                payload: SamplePayload::Features(features),
            });
            next_id += 1;
        }
    }
    Ok(Dataset::new(samples))
}
