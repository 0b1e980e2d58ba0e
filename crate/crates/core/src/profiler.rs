//! Layer-wise accuracy profiling and aggressive exit-layer selection.
//!
//! Profiling runs one incremental forward pass per sample, reading the
//! shared head at every layer, and accumulates integer correct counts per
//! layer. Selection then picks the earliest layer whose accuracy is at
//! least the full-model accuracy. The comparison is done on raw counts
//! (same denominator), so equality cases are exact — no float hazards.
//!
//! Selection is deliberately non-robust to later accuracy dips: if layer 9
//! qualifies but layer 10 dips below the full-model accuracy, layer 9 is
//! still chosen. That aggressiveness is the point; callers who want
//! robustness must encode it in the data they profile on.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::model::LayeredModel;

/// Accuracy at every layer for one task, with the raw counts that produced
/// it. `acc_by_layer[i]` is the accuracy at layer `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracyProfile {
    pub task_id: String,
    pub sample_count: u32,
    pub correct_counts: Vec<u32>,
    pub acc_by_layer: Vec<f64>,
    pub full_accuracy: f64,
}

impl AccuracyProfile {
    /// Builds a profile from raw counts, deriving the accuracy vector.
    pub fn from_counts(
        task_id: String,
        sample_count: u32,
        correct_counts: Vec<u32>,
    ) -> Result<Self> {
        if sample_count == 0 {
            return Err(Error::EmptyInput(task_id));
        }
        if correct_counts.is_empty() {
            return Err(Error::EmptyInput("correct_counts".to_string()));
        }
        let acc_by_layer: Vec<f64> = correct_counts
            .iter()
            .map(|&c| c as f64 / sample_count as f64)
            .collect();
        let full_accuracy = *acc_by_layer.last().unwrap();
        Ok(Self {
            task_id,
            sample_count,
            correct_counts,
            acc_by_layer,
            full_accuracy,
        })
    }

    pub fn num_layers(&self) -> u32 {
        self.correct_counts.len() as u32
    }

    /// Accuracy at a 1-based layer index.
    pub fn acc_at(&self, layer: u32) -> f64 {
        self.acc_by_layer[(layer - 1) as usize]
    }
}

/// The selected exit layer for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitSelection {
    pub task_id: String,
    pub exit_layer: u32,
    /// True iff some layer strictly before L satisfied the predicate.
    pub satisfied_strictly: bool,
    pub acc_at_exit: f64,
}

/// Profiles plus selections for every task in a dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskProfiles {
    pub entries: BTreeMap<String, (AccuracyProfile, ExitSelection)>,
}

impl TaskProfiles {
    pub fn exit_layers(&self) -> BTreeMap<String, u32> {
        self.entries
            .iter()
            .map(|(task, (_, sel))| (task.clone(), sel.exit_layer))
            .collect()
    }

    pub fn selection(&self, task: &str) -> Option<&ExitSelection> {
        self.entries.get(task).map(|(_, sel)| sel)
    }
}

/// Computes the layer-wise accuracy profile of `task_id` over `samples`.
///
/// One incremental forward pass per sample, reading the head at every
/// layer — not `L` independent passes. Sample order does not affect the
/// result (integer-count reduction).
pub fn layerwise_accuracy(
    model: &LayeredModel,
    samples: &[&Sample],
    task_id: &str,
) -> Result<AccuracyProfile> {
    if samples.is_empty() {
        return Err(Error::EmptyInput(task_id.to_string()));
    }
    let num_layers = model.num_layers() as usize;
    let mut counts = vec![0u32; num_layers];
    for sample in samples {
        if sample.task_id != task_id {
            return Err(Error::TaskMismatch {
                expected: task_id.to_string(),
                got: sample.task_id.clone(),
            });
        }
        if !model.label_set().contains(sample.ground_truth) {
            return Err(Error::LabelDomain(alloc::format!(
                "sample {}: label id {}",
                sample.sample_id,
                sample.ground_truth.0
            )));
        }
        let preds = model.predict_all_layers(sample)?;
        for (i, (label, _)) in preds.iter().enumerate() {
            if *label == sample.ground_truth {
                counts[i] += 1;
            }
        }
    }
    AccuracyProfile::from_counts(task_id.to_string(), samples.len() as u32, counts)
}

/// Merges per-shard count vectors from parallel profiling. Addition is
/// order-independent, so sharded profiling stays deterministic.
pub fn merge_counts(total: &mut [u32], shard: &[u32]) {
    for (t, s) in total.iter_mut().zip(shard) {
        *t += s;
    }
}

/// Earliest layer whose accuracy is at least the full-model accuracy.
///
/// Layer L always satisfies the predicate with equality, so a selection
/// always exists; `satisfied_strictly` records whether any earlier layer
/// qualified. Comparison uses raw counts, exact.
pub fn select_exit_layer(profile: &AccuracyProfile) -> ExitSelection {
    assert!(
        !profile.correct_counts.is_empty(),
        "profile must cover at least one layer"
    );
    let full_count = *profile.correct_counts.last().unwrap();
    let num_layers = profile.correct_counts.len();
    let mut exit = num_layers;
    for (i, &c) in profile.correct_counts.iter().enumerate() {
        if c >= full_count {
            exit = i + 1;
            break;
        }
    }
    ExitSelection {
        task_id: profile.task_id.clone(),
        exit_layer: exit as u32,
        satisfied_strictly: exit < num_layers,
        acc_at_exit: profile.acc_by_layer[exit - 1],
    }
}

/// Profiles every task present in the dataset and selects its exit layer.
pub fn profile_tasks(model: &LayeredModel, dataset: &Dataset) -> Result<TaskProfiles> {
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset".to_string()));
    }
    let mut entries = BTreeMap::new();
    for (task, samples) in dataset.partition_by_task() {
        let profile = layerwise_accuracy(model, &samples, task)?;
        let selection = select_exit_layer(&profile);
        entries.insert(task.to_string(), (profile, selection));
    }
    Ok(TaskProfiles { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::SamplePayload;
    use crate::model::{LabelId, LabelSet, PredictionTable, TableRow};

    fn label_ab() -> LabelSet {
        LabelSet::new(vec!["a".into(), "b".into()])
    }

    fn table_sample(row: usize, task: &str, truth: LabelId) -> Sample {
        Sample {
            sample_id: row as u64,
            task_id: task.into(),
            ground_truth: truth,
            payload: SamplePayload::TableRow(row),
        }
    }

    #[test]
    fn two_sample_hand_count() {
        // Rows ([a,a], truth a) and ([b,a], truth a): layer 1 -> 1/2,
        // layer 2 -> 2/2.
        let rows = vec![
            TableRow {
                truth: LabelId(0),
                predictions: vec![LabelId(0), LabelId(0)],
            },
            TableRow {
                truth: LabelId(0),
                predictions: vec![LabelId(1), LabelId(0)],
            },
        ];
        let model = LayeredModel::table(PredictionTable::new(label_ab(), 2, rows).unwrap());
        let samples = [
            table_sample(0, "t", LabelId(0)),
            table_sample(1, "t", LabelId(0)),
        ];
        let refs: Vec<&Sample> = samples.iter().collect();
        let profile = layerwise_accuracy(&model, &refs, "t").unwrap();
        assert_eq!(profile.acc_by_layer, vec![0.5, 1.0]);
        assert_eq!(profile.correct_counts, vec![1, 2]);
        assert_eq!(profile.full_accuracy, 1.0);
    }

    #[test]
    fn perfect_table_all_ones() {
        let rows = vec![TableRow {
            truth: LabelId(1),
            predictions: vec![LabelId(1), LabelId(1), LabelId(1)],
        }];
        let model = LayeredModel::table(PredictionTable::new(label_ab(), 3, rows).unwrap());
        let samples = [table_sample(0, "t", LabelId(1))];
        let refs: Vec<&Sample> = samples.iter().collect();
        let profile = layerwise_accuracy(&model, &refs, "t").unwrap();
        assert!(profile.acc_by_layer.iter().all(|&a| a == 1.0));
    }

    #[test]
    fn empty_dataset_rejected() {
        let model = LayeredModel::table(PredictionTable::new(label_ab(), 2, vec![]).unwrap());
        let err = layerwise_accuracy(&model, &[], "vehicle").unwrap_err();
        assert_eq!(err, Error::EmptyInput("vehicle".into()));
    }

    #[test]
    fn worked_example_selects_layer_nine() {
        // 12-layer profile over 100 samples: Acc(6)=0.70, Acc(8)=0.83,
        // Acc(9)=0.85 = Acc(12); layers 10 and 11 dip to 0.84. The dip
        // after layer 9 must not move the selection (aggressive rule).
        let counts = vec![30, 40, 50, 55, 60, 70, 75, 83, 85, 84, 84, 85];
        let profile = AccuracyProfile::from_counts("demo".into(), 100, counts).unwrap();
        let sel = select_exit_layer(&profile);
        assert_eq!(sel.exit_layer, 9);
        assert!(sel.satisfied_strictly);
        assert_eq!(sel.acc_at_exit, 0.85);
    }

    #[test]
    fn constant_profile_selects_first_layer() {
        let profile = AccuracyProfile::from_counts("t".into(), 10, vec![7, 7, 7, 7]).unwrap();
        let sel = select_exit_layer(&profile);
        assert_eq!(sel.exit_layer, 1);
        assert!(sel.satisfied_strictly);
    }

    #[test]
    fn fallback_selects_final_layer() {
        // Monotone-increasing counts where nothing before L reaches it.
        let profile = AccuracyProfile::from_counts("t".into(), 10, vec![1, 2, 9]).unwrap();
        let sel = select_exit_layer(&profile);
        assert_eq!(sel.exit_layer, 3);
        assert!(!sel.satisfied_strictly);
        assert_eq!(sel.acc_at_exit, 0.9);
    }

    #[test]
    fn task_mismatch_detected() {
        let rows = vec![TableRow {
            truth: LabelId(0),
            predictions: vec![LabelId(0)],
        }];
        let model = LayeredModel::table(PredictionTable::new(label_ab(), 1, rows).unwrap());
        let samples = [table_sample(0, "other", LabelId(0))];
        let refs: Vec<&Sample> = samples.iter().collect();
        assert!(matches!(
            layerwise_accuracy(&model, &refs, "t"),
            Err(Error::TaskMismatch { .. })
        ));
    }

    #[test]
    fn unknown_label_rejected() {
        let rows = vec![TableRow {
            truth: LabelId(0),
            predictions: vec![LabelId(0)],
        }];
        let model = LayeredModel::table(PredictionTable::new(label_ab(), 1, rows).unwrap());
        let samples = [table_sample(0, "t", LabelId(9))];
        let refs: Vec<&Sample> = samples.iter().collect();
        assert!(matches!(
            layerwise_accuracy(&model, &refs, "t"),
            Err(Error::LabelDomain(_))
        ));
    }
}
