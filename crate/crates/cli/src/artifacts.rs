//! Structured-text artifacts: datasets (JSONL), drive traces (JSONL),
//! profile artifacts, latency models, scene configs, and simulation
//! reports (JSON).
//!
//! Every JSON artifact carries a `schema_version`; unknown versions are
//! rejected outright rather than guessed at — silently misreading a profile
//! would apply wrong exit layers. Serialization is deterministic (sorted
//! maps, fixed field order), so regenerating an artifact from the same
//! inputs is byte-identical.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use serde::{Deserialize, Serialize};

use earlyexit_core::dataset::{Dataset, Sample, SamplePayload};
use earlyexit_core::executor::ExitStrategy;
use earlyexit_core::model::{LabelSet, LayeredModel};
use earlyexit_core::profiler::{AccuracyProfile, ExitSelection, TaskProfiles};
use earlyexit_core::router::{ExitConfigTable, NavEvent, SceneCategory};
use earlyexit_core::sim::{DriveTrace, FrameArrival, LatencyModel, SimReport, TraceStep};

pub const SCHEMA_VERSION: u32 = 1;

fn check_version(version: u32, what: &str) -> Result<()> {
    if version != SCHEMA_VERSION {
        bail!("{what}: unsupported schema_version {version} (supported: {SCHEMA_VERSION})");
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Dataset (JSONL)

#[derive(Debug, Serialize, Deserialize)]
struct DatasetRecord {
    sample_id: u64,
    task_id: String,
    ground_truth: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    features: Option<Vec<f32>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    row: Option<usize>,
}

pub fn write_dataset(path: &Path, dataset: &Dataset, labels: &LabelSet) -> Result<()> {
    let mut out = String::new();
    for sample in &dataset.samples {
        let truth = labels
            .name(sample.ground_truth)
            .ok_or_else(|| anyhow!("sample {}: label id out of range", sample.sample_id))?;
        let (features, row) = match &sample.payload {
            SamplePayload::Features(f) => (Some(f.clone()), None),
            SamplePayload::TableRow(r) => (None, Some(*r)),
        };
        let record = DatasetRecord {
            sample_id: sample.sample_id,
            task_id: sample.task_id.clone(),
            ground_truth: truth.to_string(),
            features,
            row,
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing dataset {}", path.display()))?;
    Ok(())
}

pub fn read_dataset(path: &Path, labels: &LabelSet) -> Result<Dataset> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading dataset {}", path.display()))?;
    let mut samples = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: DatasetRecord = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: bad dataset record", path.display(), lineno + 1))?;
        let ground_truth = labels.id_of(&record.ground_truth).ok_or_else(|| {
            anyhow!(
                "{}:{}: label '{}' not in model label set",
                path.display(),
                lineno + 1,
                record.ground_truth
            )
        })?;
        let payload = match (record.features, record.row) {
            (Some(f), None) => SamplePayload::Features(f),
            (None, Some(r)) => SamplePayload::TableRow(r),
            _ => bail!(
                "{}:{}: record must carry exactly one of 'features' or 'row'",
                path.display(),
                lineno + 1
            ),
        };
        samples.push(Sample {
            sample_id: record.sample_id,
            task_id: record.task_id,
            ground_truth,
            payload,
        });
    }
    Ok(Dataset::new(samples))
}

// ---------------------------------------------------------------------------
// Profile artifact (JSON)

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileTaskEntry {
    pub num_layers: u32,
    pub sample_count: u32,
    pub correct_counts: Vec<u32>,
    pub acc_by_layer: Vec<f64>,
    pub full_accuracy: f64,
    pub exit_layer: u32,
    pub satisfied_strictly: bool,
    pub acc_at_exit: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProfileArtifact {
    pub schema_version: u32,
    pub model_fingerprint: String,
    pub tasks: BTreeMap<String, ProfileTaskEntry>,
}

impl ProfileArtifact {
    pub fn from_profiles(profiles: &TaskProfiles, model_fingerprint: String) -> Self {
        let tasks = profiles
            .entries
            .iter()
            .map(|(task, (profile, selection))| {
                (
                    task.clone(),
                    ProfileTaskEntry {
                        num_layers: profile.num_layers(),
                        sample_count: profile.sample_count,
                        correct_counts: profile.correct_counts.clone(),
                        acc_by_layer: profile.acc_by_layer.clone(),
                        full_accuracy: profile.full_accuracy,
                        exit_layer: selection.exit_layer,
                        satisfied_strictly: selection.satisfied_strictly,
                        acc_at_exit: selection.acc_at_exit,
                    },
                )
            })
            .collect();
        Self {
            schema_version: SCHEMA_VERSION,
            model_fingerprint,
            tasks,
        }
    }

    /// Rebuilds in-memory profiles, re-deriving accuracies from raw counts
    /// and cross-checking the stored selection.
    pub fn to_profiles(&self) -> Result<TaskProfiles> {
        check_version(self.schema_version, "profile artifact")?;
        let mut entries = BTreeMap::new();
        for (task, entry) in &self.tasks {
            let profile = AccuracyProfile::from_counts(
                task.clone(),
                entry.sample_count,
                entry.correct_counts.clone(),
            )?;
            let derived = earlyexit_core::profiler::select_exit_layer(&profile);
            if derived.exit_layer != entry.exit_layer
                || derived.satisfied_strictly != entry.satisfied_strictly
            {
                bail!(
                    "profile artifact: task '{task}' stores exit layer {} but counts imply {}",
                    entry.exit_layer,
                    derived.exit_layer
                );
            }
            let selection = ExitSelection {
                task_id: task.clone(),
                exit_layer: entry.exit_layer,
                satisfied_strictly: entry.satisfied_strictly,
                acc_at_exit: entry.acc_at_exit,
            };
            entries.insert(task.clone(), (profile, selection));
        }
        Ok(TaskProfiles { entries })
    }
}

pub fn write_profile(path: &Path, artifact: &ProfileArtifact) -> Result<()> {
    write_json(path, artifact)
}

pub fn read_profile(path: &Path) -> Result<ProfileArtifact> {
    let artifact: ProfileArtifact = read_json(path)?;
    check_version(artifact.schema_version, "profile artifact")?;
    Ok(artifact)
}

// ---------------------------------------------------------------------------
// Drive trace (JSONL)

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
enum TraceRecord {
    Nav {
        timestamp_ms: u64,
        scene_id: String,
    },
    Frame {
        timestamp_ms: u64,
        sample_id: u64,
        active_tasks: Vec<String>,
    },
}

pub fn write_trace(path: &Path, trace: &DriveTrace) -> Result<()> {
    let mut out = String::new();
    for step in &trace.steps {
        let record = match step {
            TraceStep::Nav(e) => TraceRecord::Nav {
                timestamp_ms: e.timestamp_ms,
                scene_id: e.scene.0.clone(),
            },
            TraceStep::Frame(f) => TraceRecord::Frame {
                timestamp_ms: f.timestamp_ms,
                sample_id: f.sample_id,
                active_tasks: f.active_tasks.clone(),
            },
        };
        out.push_str(&serde_json::to_string(&record)?);
        out.push('\n');
    }
    fs::write(path, out).with_context(|| format!("writing trace {}", path.display()))?;
    Ok(())
}

pub fn read_trace(path: &Path) -> Result<DriveTrace> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading trace {}", path.display()))?;
    let mut steps = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let record: TraceRecord = serde_json::from_str(line)
            .with_context(|| format!("{}:{}: bad trace record", path.display(), lineno + 1))?;
        steps.push(match record {
            TraceRecord::Nav {
                timestamp_ms,
                scene_id,
            } => TraceStep::Nav(NavEvent {
                timestamp_ms,
                scene: SceneCategory(scene_id),
            }),
            TraceRecord::Frame {
                timestamp_ms,
                sample_id,
                active_tasks,
            } => TraceStep::Frame(FrameArrival {
                timestamp_ms,
                sample_id,
                active_tasks,
            }),
        });
    }
    Ok(DriveTrace { steps })
}

// ---------------------------------------------------------------------------
// Latency model (JSON)

#[derive(Debug, Serialize, Deserialize)]
pub struct LatencyArtifact {
    pub schema_version: u32,
    pub overhead_ms: f64,
    pub per_layer_ms: Vec<f64>,
}

pub fn write_latency(path: &Path, lm: &LatencyModel) -> Result<()> {
    write_json(
        path,
        &LatencyArtifact {
            schema_version: SCHEMA_VERSION,
            overhead_ms: lm.overhead_ms,
            per_layer_ms: lm.per_layer_ms.clone(),
        },
    )
}

pub fn read_latency(path: &Path) -> Result<LatencyModel> {
    let artifact: LatencyArtifact = read_json(path)?;
    check_version(artifact.schema_version, "latency model")?;
    Ok(LatencyModel::new(artifact.overhead_ms, artifact.per_layer_ms)?)
}

// ---------------------------------------------------------------------------
// Scene config (JSON)

/// Scene -> tasks association plus the default strategy and the profile
/// artifact the exit layers come from. `profile` is resolved relative to
/// the config file's directory.
#[derive(Debug, Serialize, Deserialize)]
pub struct SceneConfig {
    pub schema_version: u32,
    pub profile: String,
    pub scenes: BTreeMap<String, Vec<String>>,
    pub default_strategy: String,
}

pub fn read_scene_config(path: &Path) -> Result<SceneConfig> {
    let config: SceneConfig = read_json(path)?;
    check_version(config.schema_version, "scene config")?;
    Ok(config)
}

impl SceneConfig {
    pub fn profile_path(&self, config_path: &Path) -> std::path::PathBuf {
        let p = Path::new(&self.profile);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            config_path
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(p)
        }
    }

    pub fn default_strategy(&self) -> Result<ExitStrategy> {
        Ok(ExitStrategy::parse(&self.default_strategy)?)
    }

    /// Builds the runtime config table from the referenced profiles.
    pub fn build_table(
        &self,
        profiles: &TaskProfiles,
        num_layers: u32,
    ) -> Result<ExitConfigTable> {
        Ok(ExitConfigTable::from_profiles(
            profiles,
            &self.scenes,
            self.default_strategy()?,
            num_layers,
        )?)
    }
}

// ---------------------------------------------------------------------------
// Simulation report (JSON)

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportArtifact {
    pub schema_version: u32,
    #[serde(flatten)]
    pub report: SimReport,
}

pub fn write_report(path: &Path, report: &SimReport) -> Result<()> {
    write_json(
        path,
        &ReportArtifact {
            schema_version: SCHEMA_VERSION,
            report: report.clone(),
        },
    )
}

pub fn read_report(path: &Path) -> Result<SimReport> {
    let artifact: ReportArtifact = read_json(path)?;
    check_version(artifact.schema_version, "simulation report")?;
    Ok(artifact.report)
}

// ---------------------------------------------------------------------------
// Shared JSON helpers

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

/// Binds a dataset file to a model's label set.
pub fn read_dataset_for_model(path: &Path, model: &LayeredModel) -> Result<Dataset> {
    read_dataset(path, model.label_set())
}

#[cfg(test)]
mod tests {
    use super::*;
    use earlyexit_core::model::{LabelId, PredictionTable, TableRow};
    use earlyexit_core::rng::SplitMix64;
    use tempfile::tempdir;

    fn labels() -> LabelSet {
        LabelSet::new(vec!["car".into(), "person".into()])
    }

    #[test]
    fn dataset_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        let dataset = Dataset::new(vec![
            Sample {
                sample_id: 0,
                task_id: "vehicle".into(),
                ground_truth: LabelId(0),
                payload: SamplePayload::Features(vec![0.25, -1.5, 3.0]),
            },
            Sample {
                sample_id: 1,
                task_id: "pedestrian".into(),
                ground_truth: LabelId(1),
                payload: SamplePayload::TableRow(7),
            },
        ]);
        write_dataset(&path, &dataset, &labels()).unwrap();
        let back = read_dataset(&path, &labels()).unwrap();
        assert_eq!(dataset, back);
    }

    #[test]
    fn dataset_rejects_unknown_label() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("data.jsonl");
        std::fs::write(
            &path,
            "{\"sample_id\":0,\"task_id\":\"t\",\"ground_truth\":\"bike\",\"row\":0}\n",
        )
        .unwrap();
        let err = read_dataset(&path, &labels()).unwrap_err();
        assert!(err.to_string().contains("bike"));
    }

    #[test]
    fn trace_roundtrip_randomized() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("trace.jsonl");
        let mut rng = SplitMix64::new(3);
        let mut ts = 0u64;
        let steps = (0..50)
            .map(|i| {
                ts += rng.below(10);
                if rng.bernoulli(0.3) {
                    TraceStep::Nav(NavEvent {
                        timestamp_ms: ts,
                        scene: SceneCategory(format!("scene-{}", rng.below(4))),
                    })
                } else {
                    TraceStep::Frame(FrameArrival {
                        timestamp_ms: ts,
                        sample_id: i,
                        active_tasks: vec![format!("task-{}", rng.below(3))],
                    })
                }
            })
            .collect();
        let trace = DriveTrace { steps };
        write_trace(&path, &trace).unwrap();
        assert_eq!(read_trace(&path).unwrap(), trace);
    }

    #[test]
    fn profile_roundtrip_and_tamper_detection() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("profile.json");
        let rows = vec![TableRow {
            truth: LabelId(0),
            predictions: vec![LabelId(1), LabelId(0)],
        }];
        let model = LayeredModel::table(PredictionTable::new(labels(), 2, rows).unwrap());
        let dataset = Dataset::new(vec![Sample {
            sample_id: 0,
            task_id: "vehicle".into(),
            ground_truth: LabelId(0),
            payload: SamplePayload::TableRow(0),
        }]);
        let profiles = earlyexit_core::profiler::profile_tasks(&model, &dataset).unwrap();
        let artifact = ProfileArtifact::from_profiles(&profiles, "sha256:test".into());
        write_profile(&path, &artifact).unwrap();
        let back = read_profile(&path).unwrap();
        assert_eq!(back.to_profiles().unwrap(), profiles);

        let mut tampered = back.clone();
        tampered.tasks.get_mut("vehicle").unwrap().exit_layer = 1;
        assert!(tampered.to_profiles().is_err());
    }

    #[test]
    fn latency_roundtrip() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("latency.json");
        let lm = LatencyModel::new(1.5, vec![0.5, 0.25, 1.0]).unwrap();
        write_latency(&path, &lm).unwrap();
        assert_eq!(read_latency(&path).unwrap(), lm);
    }

    #[test]
    fn unknown_schema_version_rejected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("latency.json");
        std::fs::write(
            &path,
            "{\"schema_version\":9,\"overhead_ms\":0.0,\"per_layer_ms\":[1.0]}",
        )
        .unwrap();
        let err = read_latency(&path).unwrap_err();
        assert!(err.to_string().contains("unsupported schema_version"));
    }
}
