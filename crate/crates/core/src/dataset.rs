//! Labeled samples and dataset partitioning.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::LabelId;

/// What a sample carries into the model: a feature vector for the synthetic
/// backend, or a row reference for the prediction-table backend.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum SamplePayload {
    Features(Vec<f32>),
    TableRow(usize),
}

/// One labeled sample. Ground truth is already bound to the model label set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub sample_id: u64,
    pub task_id: String,
    pub ground_truth: LabelId,
    pub payload: SamplePayload,
}

/// An ordered collection of samples.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub samples: Vec<Sample>,
}

impl Dataset {
    pub fn new(samples: Vec<Sample>) -> Self {
        Self { samples }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Groups sample indices by task id, preserving in-task order.
    pub fn partition_by_task(&self) -> BTreeMap<&str, Vec<&Sample>> {
        let mut parts: BTreeMap<&str, Vec<&Sample>> = BTreeMap::new();
        for sample in &self.samples {
            parts.entry(sample.task_id.as_str()).or_default().push(sample);
        }
        parts
    }

    /// Index from sample id to sample, for trace binding.
    pub fn by_id(&self) -> BTreeMap<u64, &Sample> {
        self.samples.iter().map(|s| (s.sample_id, s)).collect()
    }
}
