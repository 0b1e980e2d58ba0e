//! Inference under an exit strategy.
//!
//! Strategies drive the incremental layer cursor, so an inference that
//! exits at layer `l` performs exactly `l` layer applications — no layer
//! beyond the exit is ever touched.
//!
//! The exit criterion is underdetermined in the statistical-selection
//! setting; this module ships two adaptive interpretations (max-softmax
//! confidence threshold and k-stable prediction) alongside the fixed-layer
//! and fixed-fraction rules. All adaptive strategies fall through to the
//! final layer when their criterion never fires.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Sample;
use crate::error::{Error, Result};
use crate::math::ceil_fraction;
use crate::model::{LabelId, LayeredModel};

/// How to decide when inference exits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ExitStrategy {
    /// Run every layer.
    Full,
    /// Exit at a predetermined layer unconditionally.
    FixedExit(u32),
    /// Exit at the first layer >= `min_layer` whose head confidence
    /// reaches `threshold`.
    ConfidenceThreshold { threshold: f32, min_layer: u32 },
    /// Exit at the first layer >= `min_layer` where the last `window`
    /// per-layer predictions are identical.
    StablePrediction { window: u32, min_layer: u32 },
    /// Exit after a fixed fraction of layers: `ceil(fraction * L)`,
    /// clamped to `[1, L]`.
    FixedFraction(f64),
}

impl ExitStrategy {
    /// Checks parameters against a model depth.
    pub fn validate(&self, num_layers: u32) -> Result<()> {
        match self {
            ExitStrategy::Full => Ok(()),
            ExitStrategy::FixedExit(layer) => {
                if *layer < 1 || *layer > num_layers {
                    return Err(Error::StrategyConfig(format!(
                        "fixed exit layer {layer} outside [1, {num_layers}]"
                    )));
                }
                Ok(())
            }
            ExitStrategy::ConfidenceThreshold {
                threshold,
                min_layer,
            } => {
                if !(0.0..=1.0).contains(threshold) {
                    return Err(Error::StrategyConfig(format!(
                        "confidence threshold {threshold} outside [0, 1]"
                    )));
                }
                if *min_layer < 1 || *min_layer > num_layers {
                    return Err(Error::StrategyConfig(format!(
                        "min_layer {min_layer} outside [1, {num_layers}]"
                    )));
                }
                Ok(())
            }
            ExitStrategy::StablePrediction { window, min_layer } => {
                if *window < 2 {
                    return Err(Error::StrategyConfig(format!(
                        "stable window {window} must be >= 2"
                    )));
                }
                if *min_layer < 1 || *min_layer > num_layers {
                    return Err(Error::StrategyConfig(format!(
                        "min_layer {min_layer} outside [1, {num_layers}]"
                    )));
                }
                Ok(())
            }
            ExitStrategy::FixedFraction(fraction) => {
                if !(*fraction > 0.0 && *fraction <= 1.0) {
                    return Err(Error::StrategyConfig(format!(
                        "fraction {fraction} outside (0, 1]"
                    )));
                }
                Ok(())
            }
        }
    }

    /// The exit layer of a fixed-fraction strategy for depth `L`.
    pub fn fraction_exit_layer(fraction: f64, num_layers: u32) -> u32 {
        ceil_fraction(fraction, num_layers).clamp(1, num_layers)
    }

    /// Canonical string form, parseable by [`ExitStrategy::parse`].
    pub fn canonical_name(&self) -> String {
        match self {
            ExitStrategy::Full => "full".into(),
            ExitStrategy::FixedExit(layer) => format!("fixed:{layer}"),
            ExitStrategy::ConfidenceThreshold {
                threshold,
                min_layer,
            } => format!("conf:{threshold}:{min_layer}"),
            ExitStrategy::StablePrediction { window, min_layer } => {
                format!("stable:{window}:{min_layer}")
            }
            ExitStrategy::FixedFraction(fraction) => format!("frac:{fraction}"),
        }
    }

    /// Parses `full | fixed:L | conf:T[:MIN] | stable:K[:MIN] | frac:R`.
    /// `MIN` defaults to 1.
    pub fn parse(text: &str) -> Result<Self> {
        let bad = |msg: String| Err(Error::StrategyConfig(msg));
        let mut parts = text.split(':');
        let head = parts.next().unwrap_or("");
        let rest: Vec<&str> = parts.collect();
        match (head, rest.as_slice()) {
            ("full", []) => Ok(ExitStrategy::Full),
            ("fixed", [layer]) => match layer.parse::<u32>() {
                Ok(l) => Ok(ExitStrategy::FixedExit(l)),
                Err(_) => bad(format!("bad fixed exit layer '{layer}'")),
            },
            ("conf", [t]) | ("conf", [t, _]) => {
                let threshold: f32 = match t.parse() {
                    Ok(v) => v,
                    Err(_) => return bad(format!("bad confidence threshold '{t}'")),
                };
                let min_layer = match rest.get(1) {
                    Some(m) => match m.parse::<u32>() {
                        Ok(v) => v,
                        Err(_) => return bad(format!("bad min layer '{m}'")),
                    },
                    None => 1,
                };
                Ok(ExitStrategy::ConfidenceThreshold {
                    threshold,
                    min_layer,
                })
            }
            ("stable", [k]) | ("stable", [k, _]) => {
                let window: u32 = match k.parse() {
                    Ok(v) => v,
                    Err(_) => return bad(format!("bad stability window '{k}'")),
                };
                let min_layer = match rest.get(1) {
                    Some(m) => match m.parse::<u32>() {
                        Ok(v) => v,
                        Err(_) => return bad(format!("bad min layer '{m}'")),
                    },
                    None => 1,
                };
                Ok(ExitStrategy::StablePrediction { window, min_layer })
            }
            ("frac", [r]) => match r.parse::<f64>() {
                Ok(fraction) => Ok(ExitStrategy::FixedFraction(fraction)),
                Err(_) => bad(format!("bad fraction '{r}'")),
            },
            _ => bad(format!("unrecognized strategy '{text}'")),
        }
    }
}

/// One (layer, label, confidence) trace entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEntry {
    pub layer: u32,
    pub label: LabelId,
    pub confidence: f32,
}

/// Outcome of one inference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InferenceResult {
    pub predicted: LabelId,
    pub exit_layer_used: u32,
    pub layers_executed: u32,
    pub per_layer_trace: Option<Vec<TraceEntry>>,
    pub strategy_used: ExitStrategy,
}

/// Aggregate over a batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub accuracy: f64,
    pub mean_layers_executed: f64,
}

/// Runs one inference under `strategy`.
pub fn run(
    model: &LayeredModel,
    sample: &Sample,
    strategy: &ExitStrategy,
    trace: bool,
) -> Result<InferenceResult> {
    let num_layers = model.num_layers();
    strategy.validate(num_layers)?;

    let target = match strategy {
        ExitStrategy::Full => Some(num_layers),
        ExitStrategy::FixedExit(layer) => Some(*layer),
        ExitStrategy::FixedFraction(fraction) => {
            Some(ExitStrategy::fraction_exit_layer(*fraction, num_layers))
        }
        _ => None,
    };

    let mut cursor = model.cursor(sample)?;
    let mut entries: Vec<TraceEntry> = Vec::new();
    let mut recent: Vec<LabelId> = Vec::new();
    let mut decided: Option<(LabelId, u32)> = None;

    while cursor.layer() < num_layers {
        cursor.advance()?;
        let layer = cursor.layer();
        let (label, confidence) = cursor.head()?;
        if trace {
            entries.push(TraceEntry {
                layer,
                label,
                confidence,
            });
        }
        let exit_here = match (strategy, target) {
            (_, Some(t)) => layer == t,
            (
                ExitStrategy::ConfidenceThreshold {
                    threshold,
                    min_layer,
                },
                None,
            ) => layer >= *min_layer && confidence >= *threshold,
            (ExitStrategy::StablePrediction { window, min_layer }, None) => {
                recent.push(label);
                let w = *window as usize;
                layer >= *min_layer
                    && recent.len() >= w
                    && recent[recent.len() - w..].iter().all(|l| *l == label)
            }
            _ => unreachable!("fixed-target strategies matched above"),
        };
        if exit_here || layer == num_layers {
            decided = Some((label, layer));
            break;
        }
    }

    let (predicted, exit_layer) = decided.expect("models have at least one layer");
    Ok(InferenceResult {
        predicted,
        exit_layer_used: exit_layer,
        layers_executed: cursor.layers_applied(),
        per_layer_trace: trace.then_some(entries),
        strategy_used: strategy.clone(),
    })
}

/// Runs a whole batch, preserving input order, and aggregates accuracy and
/// mean executed depth against ground truth.
pub fn batch_run(
    model: &LayeredModel,
    samples: &[Sample],
    strategy: &ExitStrategy,
) -> Result<(Vec<InferenceResult>, BatchSummary)> {
    if samples.is_empty() {
        return Err(Error::EmptyInput("batch".into()));
    }
    let mut results = Vec::with_capacity(samples.len());
    let mut correct = 0u64;
    let mut layer_sum = 0u64;
    for sample in samples {
        let result = run(model, sample, strategy, false)?;
        if result.predicted == sample.ground_truth {
            correct += 1;
        }
        layer_sum += result.layers_executed as u64;
        results.push(result);
    }
    let summary = BatchSummary {
        accuracy: correct as f64 / samples.len() as f64,
        mean_layers_executed: layer_sum as f64 / samples.len() as f64,
    };
    Ok((results, summary))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SamplePayload;
    use crate::model::{LabelSet, PredictionTable, TableRow};
    use alloc::vec;

    fn labels() -> LabelSet {
        LabelSet::new(vec!["a".into(), "b".into(), "c".into()])
    }

    fn model_from_rows(rows: Vec<Vec<u16>>, truths: Vec<u16>, layers: u32) -> LayeredModel {
        let rows = rows
            .into_iter()
            .zip(truths)
            .map(|(preds, truth)| TableRow {
                truth: LabelId(truth),
                predictions: preds.into_iter().map(LabelId).collect(),
            })
            .collect();
        LayeredModel::table(PredictionTable::new(labels(), layers, rows).unwrap())
    }

    fn sample(row: usize, truth: u16) -> Sample {
        Sample {
            sample_id: row as u64,
            task_id: "t".into(),
            ground_truth: LabelId(truth),
            payload: SamplePayload::TableRow(row),
        }
    }

    #[test]
    fn fixed_exit_runs_exactly_l_layers() {
        let model = model_from_rows(vec![vec![0, 0, 0, 0, 0]], vec![0], 5);
        let r = run(&model, &sample(0, 0), &ExitStrategy::FixedExit(3), false).unwrap();
        assert_eq!(r.exit_layer_used, 3);
        assert_eq!(r.layers_executed, 3);
    }

    #[test]
    fn full_equals_final_layer_prediction() {
        let model = model_from_rows(vec![vec![0, 1, 2, 1, 0]], vec![0], 5);
        let r = run(&model, &sample(0, 0), &ExitStrategy::Full, false).unwrap();
        assert_eq!(r.exit_layer_used, 5);
        assert_eq!(r.predicted, model.predict_at(&sample(0, 0), 5).unwrap());
    }

    #[test]
    fn zero_threshold_exits_at_min_layer() {
        let model = model_from_rows(vec![vec![1, 1, 1, 1, 1]], vec![1], 5);
        let strategy = ExitStrategy::ConfidenceThreshold {
            threshold: 0.0,
            min_layer: 2,
        };
        let r = run(&model, &sample(0, 1), &strategy, false).unwrap();
        assert_eq!(r.exit_layer_used, 2);
    }

    #[test]
    fn stable_prediction_scans_window() {
        // Row [a, b, b, b, c] with window 2: first stable pair at layer 3.
        let model = model_from_rows(vec![vec![0, 1, 1, 1, 2]], vec![1], 5);
        let strategy = ExitStrategy::StablePrediction {
            window: 2,
            min_layer: 1,
        };
        let r = run(&model, &sample(0, 1), &strategy, false).unwrap();
        assert_eq!(r.exit_layer_used, 3);
        assert_eq!(r.predicted, LabelId(1));
    }

    #[test]
    fn adaptive_falls_through_to_final_layer() {
        // Never stable with window 3: alternating labels.
        let model = model_from_rows(vec![vec![0, 1, 0, 1, 0]], vec![0], 5);
        let strategy = ExitStrategy::StablePrediction {
            window: 3,
            min_layer: 1,
        };
        let r = run(&model, &sample(0, 0), &strategy, false).unwrap();
        assert_eq!(r.exit_layer_used, 5);
    }

    #[test]
    fn fraction_rounds_up() {
        assert_eq!(ExitStrategy::fraction_exit_layer(0.5, 32), 16);
        assert_eq!(ExitStrategy::fraction_exit_layer(0.5, 12), 6);
        assert_eq!(ExitStrategy::fraction_exit_layer(0.4, 12), 5);
        assert_eq!(ExitStrategy::fraction_exit_layer(0.001, 12), 1);
    }

    #[test]
    fn trace_last_entry_matches_exit() {
        let model = model_from_rows(vec![vec![0, 1, 1, 1, 2]], vec![1], 5);
        let strategy = ExitStrategy::StablePrediction {
            window: 2,
            min_layer: 1,
        };
        let r = run(&model, &sample(0, 1), &strategy, true).unwrap();
        let entries = r.per_layer_trace.unwrap();
        assert_eq!(entries.len(), r.exit_layer_used as usize);
        let last = entries.last().unwrap();
        assert_eq!(last.layer, r.exit_layer_used);
        assert_eq!(last.label, r.predicted);
    }

    #[test]
    fn invalid_strategies_rejected() {
        let model = model_from_rows(vec![vec![0, 0]], vec![0], 2);
        for strategy in [
            ExitStrategy::FixedExit(0),
            ExitStrategy::FixedExit(3),
            ExitStrategy::ConfidenceThreshold {
                threshold: 1.5,
                min_layer: 1,
            },
            ExitStrategy::StablePrediction {
                window: 1,
                min_layer: 1,
            },
            ExitStrategy::FixedFraction(0.0),
            ExitStrategy::FixedFraction(1.5),
        ] {
            assert!(
                run(&model, &sample(0, 0), &strategy, false).is_err(),
                "{strategy:?} should be rejected"
            );
        }
    }

    #[test]
    fn batch_preserves_order_and_aggregates() {
        let model = model_from_rows(
            vec![vec![0, 0], vec![1, 1], vec![2, 0]],
            vec![0, 1, 2],
            2,
        );
        let samples = vec![sample(0, 0), sample(1, 1), sample(2, 2)];
        let (results, summary) = batch_run(&model, &samples, &ExitStrategy::Full).unwrap();
        assert_eq!(results.len(), 3);
        // Third row predicts a at the final layer but truth is c.
        assert!((summary.accuracy - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(summary.mean_layers_executed, 2.0);
    }

    #[test]
    fn batch_rejects_empty() {
        let model = model_from_rows(vec![vec![0, 0]], vec![0], 2);
        assert!(matches!(
            batch_run(&model, &[], &ExitStrategy::Full),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn parse_and_canonical_roundtrip() {
        for text in ["full", "fixed:9", "conf:0.9:1", "stable:3:1", "frac:0.5"] {
            let strategy = ExitStrategy::parse(text).unwrap();
            assert_eq!(strategy.canonical_name(), text);
        }
        assert_eq!(
            ExitStrategy::parse("conf:0.9").unwrap(),
            ExitStrategy::ConfidenceThreshold {
                threshold: 0.9,
                min_layer: 1
            }
        );
        assert!(ExitStrategy::parse("warp:9").is_err());
        assert!(ExitStrategy::parse("fixed:x").is_err());
    }
}
