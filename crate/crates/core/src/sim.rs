//! Drive-trace replay through router and executor.
//!
//! A trace interleaves navigation events and frame arrivals in timestamp
//! order. Navigation events mutate the router; each frame issues one
//! inference per active task under (a) the router-resolved strategy and
//! (b) every comparison strategy, so strategy comparisons are paired on
//! identical samples. Latency is modeled (additive per-layer costs), which
//! keeps the reduction arithmetic exact; measured wall-clock belongs to the
//! benchmark harness, not here.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::executor::{run, ExitStrategy};
use crate::model::LayeredModel;
use crate::router::{NavEvent, RouterState};

/// Report label for the router-resolved condition.
pub const ROUTED_STRATEGY_NAME: &str = "routed";

/// A camera frame reaching the perception stack.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameArrival {
    pub timestamp_ms: u64,
    pub sample_id: u64,
    pub active_tasks: Vec<String>,
}

/// One step of a drive trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum TraceStep {
    Nav(NavEvent),
    Frame(FrameArrival),
}

impl TraceStep {
    pub fn timestamp_ms(&self) -> u64 {
        match self {
            TraceStep::Nav(e) => e.timestamp_ms,
            TraceStep::Frame(f) => f.timestamp_ms,
        }
    }
}

/// Time-ordered steps.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct DriveTrace {
    pub steps: Vec<TraceStep>,
}

/// Additive latency model: `Lat(l) = overhead + sum(per_layer[..l])`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatencyModel {
    pub overhead_ms: f64,
    pub per_layer_ms: Vec<f64>,
}

impl LatencyModel {
    pub fn new(overhead_ms: f64, per_layer_ms: Vec<f64>) -> Result<Self> {
        if overhead_ms < 0.0 {
            return Err(Error::ConfigValidation(format!(
                "overhead_ms {overhead_ms} must be >= 0"
            )));
        }
        if per_layer_ms.is_empty() {
            return Err(Error::ConfigValidation("per_layer_ms is empty".into()));
        }
        if let Some((i, v)) = per_layer_ms
            .iter()
            .enumerate()
            .find(|(_, v)| !(**v > 0.0))
        {
            return Err(Error::ConfigValidation(format!(
                "per_layer_ms[{i}] = {v} must be > 0"
            )));
        }
        Ok(Self {
            overhead_ms,
            per_layer_ms,
        })
    }

    pub fn uniform(overhead_ms: f64, layer_ms: f64, num_layers: u32) -> Result<Self> {
        Self::new(overhead_ms, alloc::vec![layer_ms; num_layers as usize])
    }

    pub fn num_layers(&self) -> u32 {
        self.per_layer_ms.len() as u32
    }

    /// Modeled latency of exiting at layer `l` (0 = embedding only).
    /// Strictly increasing in `l` since every per-layer cost is positive.
    pub fn latency(&self, layer: u32) -> Result<f64> {
        if layer > self.num_layers() {
            return Err(Error::LayerIndex {
                layer,
                num_layers: self.num_layers(),
            });
        }
        let sum: f64 = self.per_layer_ms[..layer as usize].iter().sum();
        Ok(self.overhead_ms + sum)
    }
}

/// Free-function form of [`LatencyModel::latency`].
pub fn latency(lm: &LatencyModel, layer: u32) -> Result<f64> {
    lm.latency(layer)
}

/// Percentage reduction of `new_ms` relative to `base_ms`:
/// `100 * (base - new) / base`. Report formatting rounds to one decimal.
pub fn reduction_pct(base_ms: f64, new_ms: f64) -> Result<f64> {
    if !(base_ms > 0.0) {
        return Err(Error::NonpositiveBase);
    }
    Ok(100.0 * (base_ms - new_ms) / base_ms)
}

/// Aggregates for one (strategy, task) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub strategy: String,
    pub task: String,
    pub accuracy: f64,
    pub mean_latency_ms: f64,
    /// Latency reduction vs full inference, in percent.
    pub reduction_pct: f64,
    pub mean_layers: f64,
    /// Frames where this strategy was correct while full inference was
    /// wrong on the same sample.
    pub over_inference_count: u64,
    pub sample_count: u64,
}

/// One simulated request, for switch-timing audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameLogRecord {
    pub timestamp_ms: u64,
    pub sample_id: u64,
    pub task: String,
    /// Canonical name of the router-resolved strategy for this request.
    pub resolved: String,
}

/// Full simulation output. Serialization is deterministic: rows are sorted
/// by (strategy, task) and the frame log follows trace order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub rows: Vec<ReportRow>,
    pub switch_count: u64,
    pub frame_log: Vec<FrameLogRecord>,
}

impl SimReport {
    pub fn row(&self, strategy: &str, task: &str) -> Option<&ReportRow> {
        self.rows
            .iter()
            .find(|r| r.strategy == strategy && r.task == task)
    }

    pub fn tasks(&self) -> Vec<&str> {
        let mut tasks: Vec<&str> = self.rows.iter().map(|r| r.task.as_str()).collect();
        tasks.sort_unstable();
        tasks.dedup();
        tasks
    }
}

#[derive(Default)]
struct Accumulator {
    requests: u64,
    correct: u64,
    layer_sum: u64,
    latency_sum: f64,
    over_inference: u64,
}

/// Replays a trace and reports per-strategy per-task outcomes.
///
/// `router` must be bound to a config table consistent with the model; the
/// latency model must cover exactly the model's layer count. In-flight
/// requests complete under the strategy resolved at their frame's
/// timestamp; a scene switch affects only later frames.
pub fn simulate(
    trace: &DriveTrace,
    dataset: &Dataset,
    model: &LayeredModel,
    router: RouterState,
    latency_model: &LatencyModel,
    comparisons: &[ExitStrategy],
) -> Result<SimReport> {
    let num_layers = model.num_layers();
    if latency_model.num_layers() != num_layers {
        return Err(Error::ConfigValidation(format!(
            "latency model covers {} layers, model has {num_layers}",
            latency_model.num_layers()
        )));
    }
    for strategy in comparisons {
        strategy.validate(num_layers)?;
    }

    let by_id = dataset.by_id();
    let full_latency = latency_model.latency(num_layers)?;
    let initial_switches = router.switch_count;
    let mut router = router;
    let mut accs: BTreeMap<(String, String), Accumulator> = BTreeMap::new();
    let mut frame_log = Vec::new();
    let mut prev_ts = 0u64;

    for (step_index, step) in trace.steps.iter().enumerate() {
        let ts = step.timestamp_ms();
        if step_index > 0 && ts < prev_ts {
            return Err(Error::TraceOrder { step: step_index });
        }
        prev_ts = ts;
        match step {
            TraceStep::Nav(event) => {
                router = router
                    .apply_event(event)
                    .map_err(|_| Error::TraceOrder { step: step_index })?;
            }
            TraceStep::Frame(frame) => {
                let sample = by_id.get(&frame.sample_id).ok_or(Error::TraceBinding {
                    step: step_index,
                    sample_id: frame.sample_id,
                })?;
                for task in &frame.active_tasks {
                    let full_result = run(model, sample, &ExitStrategy::Full, false)?;
                    let full_correct = full_result.predicted == sample.ground_truth;

                    let resolved = router.resolve(task);
                    frame_log.push(FrameLogRecord {
                        timestamp_ms: frame.timestamp_ms,
                        sample_id: frame.sample_id,
                        task: task.clone(),
                        resolved: resolved.canonical_name(),
                    });

                    let mut record = |name: String, result: &crate::executor::InferenceResult|
                     -> Result<()> {
                        let correct = result.predicted == sample.ground_truth;
                        let acc = accs.entry((name, task.clone())).or_default();
                        acc.requests += 1;
                        acc.correct += u64::from(correct);
                        acc.layer_sum += result.layers_executed as u64;
                        acc.latency_sum += latency_model.latency(result.layers_executed)?;
                        acc.over_inference += u64::from(correct && !full_correct);
                        Ok(())
                    };

                    let routed_result = if resolved == ExitStrategy::Full {
                        full_result.clone()
                    } else {
                        run(model, sample, &resolved, false)?
                    };
                    record(ROUTED_STRATEGY_NAME.to_string(), &routed_result)?;

                    for strategy in comparisons {
                        let result = if *strategy == ExitStrategy::Full {
                            full_result.clone()
                        } else {
                            run(model, sample, strategy, false)?
                        };
                        record(strategy.canonical_name(), &result)?;
                    }
                }
            }
        }
    }

    let rows = accs
        .into_iter()
        .map(|((strategy, task), acc)| {
            let mean_latency = acc.latency_sum / acc.requests as f64;
            ReportRow {
                strategy,
                task,
                accuracy: acc.correct as f64 / acc.requests as f64,
                mean_latency_ms: mean_latency,
                reduction_pct: reduction_pct(full_latency, mean_latency)
                    .expect("full latency is positive"),
                mean_layers: acc.layer_sum as f64 / acc.requests as f64,
                over_inference_count: acc.over_inference,
                sample_count: acc.requests,
            }
        })
        .collect();

    Ok(SimReport {
        rows,
        switch_count: router.switch_count - initial_switches,
        frame_log,
    })
}

/// A sample where some intermediate layer is correct but the final layer
/// is not.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlaggedSample {
    pub sample_id: u64,
    pub earliest_correct_layer: u32,
}

/// Over-inference findings for one task.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TaskOverInference {
    pub sample_count: u64,
    pub count: u64,
    pub flagged: Vec<FlaggedSample>,
}

/// Per-task over-inference findings.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OverInferenceReport {
    pub per_task: BTreeMap<String, TaskOverInference>,
}

/// Scans every sample's per-layer prediction trace and flags those where
/// full inference spoils an earlier correct prediction.
pub fn over_inference_analysis(
    model: &LayeredModel,
    dataset: &Dataset,
) -> Result<OverInferenceReport> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset".into()));
    }
    let mut per_task: BTreeMap<String, TaskOverInference> = BTreeMap::new();
    for sample in &dataset.samples {
        let entry = per_task.entry(sample.task_id.clone()).or_default();
        entry.sample_count += 1;
        let preds = model.predict_all_layers(sample)?;
        let (final_pred, _) = preds.last().expect("models have at least one layer");
        if *final_pred == sample.ground_truth {
            continue;
        }
        let earliest = preds[..preds.len() - 1]
            .iter()
            .position(|(label, _)| *label == sample.ground_truth);
        if let Some(i) = earliest {
            entry.count += 1;
            entry.flagged.push(FlaggedSample {
                sample_id: sample.sample_id,
                earliest_correct_layer: i as u32 + 1,
            });
        }
    }
    Ok(OverInferenceReport { per_task })
}

/// One strategy's cell in a comparison row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonCell {
    pub strategy: String,
    pub accuracy: f64,
    pub mean_latency_ms: f64,
    pub best_accuracy: bool,
    pub best_latency: bool,
}

/// Per-task aligned comparison across strategies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskComparison {
    pub task: String,
    pub cells: Vec<ComparisonCell>,
}

/// Comparison table across all tasks of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StrategyComparison {
    pub tasks: Vec<TaskComparison>,
}

/// Aligns the requested strategies task by task and flags the best cells:
/// highest accuracy and lowest latency per task, ties flagged jointly.
pub fn compare_strategies(
    report: &SimReport,
    strategies: &[String],
) -> Result<StrategyComparison> {
    if strategies.is_empty() {
        return Err(Error::ReportShape("no strategies requested".into()));
    }
    let mut tasks = Vec::new();
    for task in report.tasks() {
        let mut cells = Vec::with_capacity(strategies.len());
        for strategy in strategies {
            let row = report.row(strategy, task).ok_or_else(|| {
                Error::ReportShape(format!("strategy '{strategy}' missing for task '{task}'"))
            })?;
            cells.push(ComparisonCell {
                strategy: strategy.clone(),
                accuracy: row.accuracy,
                mean_latency_ms: row.mean_latency_ms,
                best_accuracy: false,
                best_latency: false,
            });
        }
        let best_acc = cells
            .iter()
            .map(|c| c.accuracy)
            .fold(f64::NEG_INFINITY, f64::max);
        let best_lat = cells
            .iter()
            .map(|c| c.mean_latency_ms)
            .fold(f64::INFINITY, f64::min);
        for cell in &mut cells {
            cell.best_accuracy = cell.accuracy == best_acc;
            cell.best_latency = cell.mean_latency_ms == best_lat;
        }
        tasks.push(TaskComparison {
            task: task.to_string(),
            cells,
        });
    }
    Ok(StrategyComparison { tasks })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Sample, SamplePayload};
    use crate::model::{LabelId, LabelSet, PredictionTable, TableRow};
    use crate::router::{ExitConfigTable, SceneCategory};
    use alloc::vec;

    fn labels() -> LabelSet {
        LabelSet::new(vec!["car".into(), "truck".into()])
    }

    /// Three-layer table model with one always-correct row per sample.
    fn fixture() -> (LayeredModel, Dataset) {
        let rows = vec![
            TableRow {
                truth: LabelId(0),
                predictions: vec![LabelId(1), LabelId(0), LabelId(0)],
            },
            TableRow {
                truth: LabelId(0),
                predictions: vec![LabelId(0), LabelId(0), LabelId(0)],
            },
        ];
        let model = LayeredModel::table(PredictionTable::new(labels(), 3, rows).unwrap());
        let samples = vec![
            Sample {
                sample_id: 0,
                task_id: "vehicle".into(),
                ground_truth: LabelId(0),
                payload: SamplePayload::TableRow(0),
            },
            Sample {
                sample_id: 1,
                task_id: "vehicle".into(),
                ground_truth: LabelId(0),
                payload: SamplePayload::TableRow(1),
            },
        ];
        (model, Dataset::new(samples))
    }

    fn router_with(scene: &str, task: &str, layer: u32) -> RouterState {
        let mut entries = BTreeMap::new();
        let mut per_task = BTreeMap::new();
        per_task.insert(task.to_string(), layer);
        entries.insert(SceneCategory(scene.into()), per_task);
        RouterState::new(ExitConfigTable::new(entries, ExitStrategy::Full))
    }

    #[test]
    fn latency_prefix_sums() {
        let lm = LatencyModel::uniform(2.0, 1.0, 5).unwrap();
        assert_eq!(lm.latency(0).unwrap(), 2.0);
        assert_eq!(lm.latency(5).unwrap(), 7.0);
        assert!(lm.latency(6).is_err());
        let mut prev = -1.0;
        for l in 0..=5 {
            let lat = lm.latency(l).unwrap();
            assert!(lat > prev);
            prev = lat;
        }
    }

    #[test]
    fn latency_model_rejects_bad_costs() {
        assert!(LatencyModel::new(-1.0, vec![1.0]).is_err());
        assert!(LatencyModel::new(0.0, vec![1.0, 0.0]).is_err());
        assert!(LatencyModel::new(0.0, vec![]).is_err());
    }

    #[test]
    fn reduction_pct_published_values() {
        assert!((reduction_pct(0.036, 0.013).unwrap() - 63.888_888).abs() < 1e-3);
        assert!((reduction_pct(0.609, 0.361).unwrap() - 40.722_495).abs() < 1e-3);
        assert_eq!(reduction_pct(5.0, 5.0).unwrap(), 0.0);
        assert_eq!(reduction_pct(0.0, 1.0), Err(Error::NonpositiveBase));
        assert_eq!(reduction_pct(-1.0, 1.0), Err(Error::NonpositiveBase));
    }

    #[test]
    fn simulate_single_scene() {
        let (model, dataset) = fixture();
        let router = router_with("urban", "vehicle", 2);
        let lm = LatencyModel::uniform(0.0, 1.0, 3).unwrap();
        let trace = DriveTrace {
            steps: vec![
                TraceStep::Nav(NavEvent {
                    timestamp_ms: 0,
                    scene: SceneCategory("urban".into()),
                }),
                TraceStep::Frame(FrameArrival {
                    timestamp_ms: 1,
                    sample_id: 0,
                    active_tasks: vec!["vehicle".into()],
                }),
                TraceStep::Frame(FrameArrival {
                    timestamp_ms: 2,
                    sample_id: 1,
                    active_tasks: vec!["vehicle".into()],
                }),
            ],
        };
        let report = simulate(
            &trace,
            &dataset,
            &model,
            router,
            &lm,
            &[ExitStrategy::Full],
        )
        .unwrap();
        assert_eq!(report.switch_count, 1);
        let routed = report.row(ROUTED_STRATEGY_NAME, "vehicle").unwrap();
        assert_eq!(routed.mean_layers, 2.0);
        assert_eq!(routed.accuracy, 1.0);
        // Uniform unit costs: exit 2 of 3 -> 33.3% reduction.
        assert!((routed.reduction_pct - 100.0 / 3.0).abs() < 1e-9);
        let full = report.row("full", "vehicle").unwrap();
        assert_eq!(full.mean_layers, 3.0);
        assert_eq!(full.reduction_pct, 0.0);
    }

    #[test]
    fn empty_trace_empty_report() {
        let (model, dataset) = fixture();
        let router = router_with("urban", "vehicle", 2);
        let lm = LatencyModel::uniform(0.0, 1.0, 3).unwrap();
        let report = simulate(&DriveTrace::default(), &dataset, &model, router, &lm, &[]).unwrap();
        assert!(report.rows.is_empty());
        assert_eq!(report.switch_count, 0);
    }

    #[test]
    fn unknown_sample_id_is_a_binding_error() {
        let (model, dataset) = fixture();
        let router = router_with("urban", "vehicle", 2);
        let lm = LatencyModel::uniform(0.0, 1.0, 3).unwrap();
        let trace = DriveTrace {
            steps: vec![TraceStep::Frame(FrameArrival {
                timestamp_ms: 0,
                sample_id: 99,
                active_tasks: vec!["vehicle".into()],
            })],
        };
        assert_eq!(
            simulate(&trace, &dataset, &model, router, &lm, &[]).unwrap_err(),
            Error::TraceBinding {
                step: 0,
                sample_id: 99
            }
        );
    }

    #[test]
    fn decreasing_timestamps_name_the_step() {
        let (model, dataset) = fixture();
        let router = router_with("urban", "vehicle", 2);
        let lm = LatencyModel::uniform(0.0, 1.0, 3).unwrap();
        let trace = DriveTrace {
            steps: vec![
                TraceStep::Frame(FrameArrival {
                    timestamp_ms: 10,
                    sample_id: 0,
                    active_tasks: vec![],
                }),
                TraceStep::Frame(FrameArrival {
                    timestamp_ms: 5,
                    sample_id: 1,
                    active_tasks: vec![],
                }),
            ],
        };
        assert_eq!(
            simulate(&trace, &dataset, &model, router, &lm, &[]).unwrap_err(),
            Error::TraceOrder { step: 1 }
        );
    }

    #[test]
    fn over_inference_flags_constructed_rows() {
        // Row 0: [car, car, truck] truth car -> flagged, earliest layer 1.
        // Row 1: [truck, car, car] truth car -> final layer correct, clean.
        let rows = vec![
            TableRow {
                truth: LabelId(0),
                predictions: vec![LabelId(0), LabelId(0), LabelId(1)],
            },
            TableRow {
                truth: LabelId(0),
                predictions: vec![LabelId(1), LabelId(0), LabelId(0)],
            },
        ];
        let model = LayeredModel::table(PredictionTable::new(labels(), 3, rows).unwrap());
        let dataset = Dataset::new(vec![
            Sample {
                sample_id: 0,
                task_id: "vehicle".into(),
                ground_truth: LabelId(0),
                payload: SamplePayload::TableRow(0),
            },
            Sample {
                sample_id: 1,
                task_id: "vehicle".into(),
                ground_truth: LabelId(0),
                payload: SamplePayload::TableRow(1),
            },
        ]);
        let report = over_inference_analysis(&model, &dataset).unwrap();
        let task = &report.per_task["vehicle"];
        assert_eq!(task.count, 1);
        assert_eq!(task.flagged[0].sample_id, 0);
        assert_eq!(task.flagged[0].earliest_correct_layer, 1);
    }

    #[test]
    fn comparison_flags_best_cells() {
        let report = SimReport {
            rows: vec![
                ReportRow {
                    strategy: "full".into(),
                    task: "vehicle".into(),
                    accuracy: 0.8,
                    mean_latency_ms: 3.0,
                    reduction_pct: 0.0,
                    mean_layers: 3.0,
                    over_inference_count: 0,
                    sample_count: 10,
                },
                ReportRow {
                    strategy: "routed".into(),
                    task: "vehicle".into(),
                    accuracy: 0.9,
                    mean_latency_ms: 2.0,
                    reduction_pct: 33.3,
                    mean_layers: 2.0,
                    over_inference_count: 1,
                    sample_count: 10,
                },
            ],
            switch_count: 1,
            frame_log: vec![],
        };
        let cmp =
            compare_strategies(&report, &["full".to_string(), "routed".to_string()]).unwrap();
        let cells = &cmp.tasks[0].cells;
        assert!(!cells[0].best_accuracy && !cells[0].best_latency);
        assert!(cells[1].best_accuracy && cells[1].best_latency);

        let err = compare_strategies(&report, &["frac:0.5".to_string()]).unwrap_err();
        assert!(matches!(err, Error::ReportShape(_)));

        let single = compare_strategies(&report, &["full".to_string()]).unwrap();
        assert_eq!(single.tasks[0].cells.len(), 1);
        assert!(single.tasks[0].cells[0].best_accuracy);
    }

    #[test]
    fn comparison_ties_flag_jointly() {
        let row = |strategy: &str| ReportRow {
            strategy: strategy.into(),
            task: "t".into(),
            accuracy: 0.5,
            mean_latency_ms: 1.0,
            reduction_pct: 0.0,
            mean_layers: 1.0,
            over_inference_count: 0,
            sample_count: 4,
        };
        let report = SimReport {
            rows: vec![row("a"), row("b")],
            switch_count: 0,
            frame_log: vec![],
        };
        let cmp = compare_strategies(&report, &["a".to_string(), "b".to_string()]).unwrap();
        assert!(cmp.tasks[0].cells.iter().all(|c| c.best_accuracy));
        assert!(cmp.tasks[0].cells.iter().all(|c| c.best_latency));
    }
}
