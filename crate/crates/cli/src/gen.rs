//! Fixture generation from a spec file.
//!
//! A gen spec is a JSON document selecting one of the two backends:
//!
//! ```json
//! {"schema_version":1,"kind":"synthetic","hidden_dim":32,"num_layers":10,
//!  "num_classes":4,"seed":7,"planted_depths":{"taskA":3,"taskB":7},
//!  "overthink_rate":0.0,"samples_per_task":200}
//! ```
//!
//! ```json
//! {"schema_version":1,"kind":"table","labels":["car","truck"],"num_layers":3,
//!  "samples":[{"task_id":"vehicle","truth":"car",
//!              "predictions":["truck","car","car"]}]}
//! ```
//!
//! Generation is deterministic: the same spec always produces byte-identical
//! model and dataset files.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use earlyexit_core::dataset::{Dataset, Sample, SamplePayload};
use earlyexit_core::model::{
    generate_synthetic_dataset, LabelSet, LayeredModel, PredictionTable, SyntheticTransformer,
    SyntheticTransformerSpec, TableRow,
};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GenSpec {
    Synthetic {
        schema_version: u32,
        hidden_dim: u32,
        num_layers: u32,
        num_classes: u32,
        seed: u64,
        #[serde(default)]
        planted_depths: BTreeMap<String, u32>,
        #[serde(default)]
        overthink_rate: f32,
        samples_per_task: u32,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        label_names: Option<Vec<String>>,
    },
    Table {
        schema_version: u32,
        labels: Vec<String>,
        num_layers: u32,
        samples: Vec<TableSampleSpec>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableSampleSpec {
    pub task_id: String,
    pub truth: String,
    pub predictions: Vec<String>,
}

pub fn read_gen_spec(path: &Path) -> Result<GenSpec> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let spec: GenSpec =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    let version = match &spec {
        GenSpec::Synthetic { schema_version, .. } => *schema_version,
        GenSpec::Table { schema_version, .. } => *schema_version,
    };
    if version != crate::artifacts::SCHEMA_VERSION {
        bail!(
            "gen spec: unsupported schema_version {version} (supported: {})",
            crate::artifacts::SCHEMA_VERSION
        );
    }
    Ok(spec)
}

/// Builds the model and dataset a gen spec describes.
pub fn build(spec: &GenSpec) -> Result<(LayeredModel, Dataset)> {
    match spec {
        GenSpec::Synthetic {
            hidden_dim,
            num_layers,
            num_classes,
            seed,
            planted_depths,
            overthink_rate,
            samples_per_task,
            label_names,
            ..
        } => {
            let mut planted = planted_depths.clone();
            if planted.is_empty() {
                // No planted tasks requested: a single immediately-decodable
                // task keeps the dataset non-degenerate.
                planted.insert("default".to_string(), 1);
            }
            let model_spec = SyntheticTransformerSpec {
                hidden_dim: *hidden_dim,
                num_layers: *num_layers,
                num_classes: *num_classes,
                seed: *seed,
                planted_depths: planted,
                overthink_rate: *overthink_rate,
            };
            let model = SyntheticTransformer::generate_with_labels(
                model_spec.clone(),
                label_names.clone(),
            )?;
            let dataset = generate_synthetic_dataset(&model_spec, *samples_per_task)?;
            Ok((LayeredModel::from_synthetic(model), dataset))
        }
        GenSpec::Table {
            labels,
            num_layers,
            samples,
            ..
        } => {
            let label_set = LabelSet::new(labels.clone());
            let lookup = |name: &str| {
                label_set
                    .id_of(name)
                    .ok_or_else(|| anyhow!("label '{name}' not in label list"))
            };
            let mut rows = Vec::with_capacity(samples.len());
            let mut dataset_samples = Vec::with_capacity(samples.len());
            for (i, s) in samples.iter().enumerate() {
                let truth = lookup(&s.truth)?;
                let predictions = s
                    .predictions
                    .iter()
                    .map(|p| lookup(p))
                    .collect::<Result<Vec<_>>>()?;
                rows.push(TableRow { truth, predictions });
                dataset_samples.push(Sample {
                    sample_id: i as u64,
                    task_id: s.task_id.clone(),
                    ground_truth: truth,
                    payload: SamplePayload::TableRow(i),
                });
            }
            let table = PredictionTable::new(label_set, *num_layers, rows)?;
            Ok((LayeredModel::table(table), Dataset::new(dataset_samples)))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn synthetic_build_is_deterministic() {
        let spec = GenSpec::Synthetic {
            schema_version: 1,
            hidden_dim: 20,
            num_layers: 5,
            num_classes: 3,
            seed: 123,
            planted_depths: BTreeMap::from([("t".to_string(), 2)]),
            overthink_rate: 0.0,
            samples_per_task: 10,
            label_names: None,
        };
        let (m1, d1) = build(&spec).unwrap();
        let (m2, d2) = build(&spec).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(d1, d2);
    }

    #[test]
    fn table_build_binds_labels() {
        let spec = GenSpec::Table {
            schema_version: 1,
            labels: vec!["car".into(), "truck".into()],
            num_layers: 2,
            samples: vec![TableSampleSpec {
                task_id: "vehicle".into(),
                truth: "car".into(),
                predictions: vec!["truck".into(), "car".into()],
            }],
        };
        let (model, dataset) = build(&spec).unwrap();
        assert_eq!(model.num_layers(), 2);
        assert_eq!(dataset.len(), 1);

        let bad = GenSpec::Table {
            schema_version: 1,
            labels: vec!["car".into()],
            num_layers: 1,
            samples: vec![TableSampleSpec {
                task_id: "vehicle".into(),
                truth: "bike".into(),
                predictions: vec!["car".into()],
            }],
        };
        assert!(build(&bad).is_err());
    }
}
