//! Prediction-table backend: stores per-layer predicted labels outright.
//!
//! Float-free and exact, which makes it the oracle backend for profiling and
//! selection logic. Confidence is fixed at 1.0 because the table stores
//! labels only.

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{LabelId, LabelSet};

/// Ground truth plus the predicted label at every layer for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub truth: LabelId,
    pub predictions: Vec<LabelId>,
}

/// Table backend over `num_layers` layers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionTable {
    labels: LabelSet,
    num_layers: u32,
    rows: Vec<TableRow>,
}

impl PredictionTable {
    pub fn new(labels: LabelSet, num_layers: u32, rows: Vec<TableRow>) -> Result<Self> {
        let mut bad = Vec::new();
        if num_layers == 0 {
            bad.push("num_layers must be >= 1".to_string());
        }
        if labels.is_empty() {
            bad.push("label set is empty".to_string());
        }
        for (i, row) in rows.iter().enumerate() {
            if row.predictions.len() != num_layers as usize {
                bad.push(format!(
                    "row {i} has {} predictions, expected {num_layers}",
                    row.predictions.len()
                ));
            }
            if !labels.contains(row.truth) {
                bad.push(format!("row {i} truth label {} out of range", row.truth.0));
            }
            for (l, p) in row.predictions.iter().enumerate() {
                if !labels.contains(*p) {
                    bad.push(format!("row {i} layer {} label {} out of range", l + 1, p.0));
                }
            }
        }
        if bad.is_empty() {
            Ok(Self {
                labels,
                num_layers,
                rows,
            })
        } else {
            Err(Error::SpecValidation(bad))
        }
    }

    pub fn labels(&self) -> &LabelSet {
        &self.labels
    }

    pub fn num_layers(&self) -> u32 {
        self.num_layers
    }

    pub fn rows(&self) -> &[TableRow] {
        &self.rows
    }

    pub fn check_row(&self, row: usize) -> Result<()> {
        if row >= self.rows.len() {
            return Err(Error::RowOutOfRange {
                row,
                rows: self.rows.len(),
            });
        }
        Ok(())
    }

    /// Stored prediction for `row` at `layer` (1-based).
    pub fn prediction(&self, row: usize, layer: u32) -> Result<LabelId> {
        self.check_row(row)?;
        if layer == 0 || layer > self.num_layers {
            return Err(Error::LayerIndex {
                layer,
                num_layers: self.num_layers,
            });
        }
        Ok(self.rows[row].predictions[(layer - 1) as usize])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Sample, SamplePayload};
    use crate::model::LayeredModel;
    use alloc::vec;

    fn labels() -> LabelSet {
        LabelSet::new(vec!["car".into(), "person".into(), "truck".into()])
    }

    fn table_model() -> LayeredModel {
        let rows = vec![TableRow {
            truth: LabelId(0),
            predictions: vec![LabelId(0), LabelId(0), LabelId(1)],
        }];
        LayeredModel::table(PredictionTable::new(labels(), 3, rows).unwrap())
    }

    fn row_sample(row: usize) -> Sample {
        Sample {
            sample_id: row as u64,
            task_id: "t".into(),
            ground_truth: LabelId(0),
            payload: SamplePayload::TableRow(row),
        }
    }

    #[test]
    fn lookup_matches_stored_row() {
        // Row [car, car, person]: layer 3 reads person.
        let model = table_model();
        let label = model.predict_at(&row_sample(0), 3).unwrap();
        assert_eq!(label, LabelId(1));
    }

    #[test]
    fn confidence_is_fixed() {
        let model = table_model();
        let (_, conf) = model.head_confidence(&row_sample(0), 2).unwrap();
        assert_eq!(conf, 1.0);
    }

    #[test]
    fn embed_yields_placeholder() {
        let model = table_model();
        let h = model.embed(&row_sample(0)).unwrap();
        assert_eq!(h.layer_index, 0);
        assert!(h.activations.is_empty());
    }

    #[test]
    fn layer_out_of_range_rejected() {
        let model = table_model();
        assert!(matches!(
            model.predict_at(&row_sample(0), 4),
            Err(Error::LayerIndex { layer: 4, num_layers: 3 })
        ));
        assert!(matches!(
            model.predict_at(&row_sample(0), 0),
            Err(Error::LayerIndex { layer: 0, .. })
        ));
    }

    #[test]
    fn ragged_rows_rejected() {
        let rows = vec![TableRow {
            truth: LabelId(0),
            predictions: vec![LabelId(0)],
        }];
        assert!(PredictionTable::new(labels(), 3, rows).is_err());
    }
}
