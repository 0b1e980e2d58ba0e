//! Artifact validation: detects the artifact type, checks schema and
//! embedded invariants, and cross-references a model file when given.

use std::path::Path;

use anyhow::{bail, Context, Result};

use earlyexit_core::model::{LayeredModel, ModelBackend, SyntheticTransformer};
use earlyexit_core::sim::TraceStep;

use crate::artifacts;
use crate::commands::ValidateArgs;
use crate::container;
use crate::fingerprint::fingerprint_file;

pub fn cmd_validate(args: ValidateArgs) -> Result<()> {
    let reference = match &args.model {
        Some(path) => Some((container::read_model(path)?, fingerprint_file(path)?)),
        None => None,
    };
    let violations = validate_artifact(&args.input, reference.as_ref())?;
    if violations.is_empty() {
        println!("{}: ok", args.input.display());
        Ok(())
    } else {
        for v in &violations {
            println!("{}: {v}", args.input.display());
        }
        bail!("{} violation(s)", violations.len());
    }
}

/// Returns the violation list (empty = valid). IO failures and files of no
/// recognizable type are hard errors.
pub fn validate_artifact(
    path: &Path,
    reference: Option<&(LayeredModel, String)>,
) -> Result<Vec<String>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    if bytes.starts_with(b"EEMC") {
        return Ok(validate_model(&bytes));
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| anyhow::anyhow!("{}: neither a model container nor text", path.display()))?;
    // Whole-document JSON artifacts first, then line-oriented ones.
    let value: serde_json::Value = serde_json::from_str(text).or_else(|_| {
        let first_line = text.lines().find(|l| !l.trim().is_empty()).unwrap_or("");
        serde_json::from_str(first_line)
            .with_context(|| format!("{}: not a recognized artifact", path.display()))
    })?;
    let keys = value
        .as_object()
        .ok_or_else(|| anyhow::anyhow!("{}: expected a JSON object", path.display()))?;

    if keys.contains_key("tasks") && keys.contains_key("model_fingerprint") {
        validate_profile(path, reference)
    } else if keys.contains_key("per_layer_ms") {
        Ok(validate_via(|| artifacts::read_latency(path).map(|_| ())))
    } else if keys.contains_key("scenes") {
        Ok(validate_via(|| artifacts::read_scene_config(path).map(|_| ())))
    } else if keys.contains_key("rows") && keys.contains_key("switch_count") {
        validate_report(path)
    } else if keys.contains_key("kind") {
        validate_trace(path)
    } else if keys.contains_key("sample_id") && keys.contains_key("ground_truth") {
        validate_dataset(path, reference)
    } else {
        bail!("{}: not a recognized artifact", path.display());
    }
}

fn validate_via(f: impl FnOnce() -> Result<()>) -> Vec<String> {
    match f() {
        Ok(()) => vec![],
        Err(e) => vec![format!("{e:#}")],
    }
}

fn validate_model(bytes: &[u8]) -> Vec<String> {
    let model = match container::decode_model(bytes) {
        Ok(m) => m,
        Err(e) => return vec![format!("{e:#}")],
    };
    // Weights must match their spec: a container whose weights diverge
    // from regeneration is stale or corrupt.
    if let ModelBackend::Synthetic(m) = model.backend() {
        match SyntheticTransformer::generate_with_labels(
            m.spec().clone(),
            Some(m.labels().names().to_vec()),
        ) {
            Ok(expected) => {
                if &expected != m {
                    return vec!["stored weights do not match the embedded spec".into()];
                }
            }
            Err(e) => return vec![format!("embedded spec invalid: {e}")],
        }
    }
    vec![]
}

fn validate_profile(
    path: &Path,
    reference: Option<&(LayeredModel, String)>,
) -> Result<Vec<String>> {
    let artifact = match artifacts::read_profile(path) {
        Ok(a) => a,
        Err(e) => return Ok(vec![format!("{e:#}")]),
    };
    let mut violations = Vec::new();
    for (task, entry) in &artifact.tasks {
        if entry.correct_counts.len() != entry.num_layers as usize {
            violations.push(format!(
                "task '{task}': {} counts for {} layers",
                entry.correct_counts.len(),
                entry.num_layers
            ));
            continue;
        }
        if entry.sample_count == 0 {
            violations.push(format!("task '{task}': zero samples"));
            continue;
        }
        if let Some(&c) = entry.correct_counts.iter().find(|&&c| c > entry.sample_count) {
            violations.push(format!(
                "task '{task}': count {c} exceeds sample_count {}",
                entry.sample_count
            ));
        }
        for (i, (&c, &acc)) in entry
            .correct_counts
            .iter()
            .zip(&entry.acc_by_layer)
            .enumerate()
        {
            let derived = c as f64 / entry.sample_count as f64;
            if (derived - acc).abs() > 1e-9 {
                violations.push(format!(
                    "task '{task}': acc_by_layer[{i}] = {acc} but counts give {derived}"
                ));
            }
        }
        if entry.acc_by_layer.last() != Some(&entry.full_accuracy) {
            violations.push(format!("task '{task}': full_accuracy mismatch"));
        }
        if entry.exit_layer < 1 || entry.exit_layer > entry.num_layers {
            violations.push(format!(
                "task '{task}': exit_layer {} outside [1, {}]",
                entry.exit_layer, entry.num_layers
            ));
            continue;
        }
        // Recompute the selection from raw counts.
        let full = *entry.correct_counts.last().unwrap();
        let derived_exit = entry
            .correct_counts
            .iter()
            .position(|&c| c >= full)
            .map(|i| i as u32 + 1)
            .unwrap_or(entry.num_layers);
        if derived_exit != entry.exit_layer {
            violations.push(format!(
                "task '{task}': exit_layer {} but counts imply {derived_exit}",
                entry.exit_layer
            ));
        }
        if entry.satisfied_strictly != (entry.exit_layer < entry.num_layers) {
            violations.push(format!("task '{task}': satisfied_strictly inconsistent"));
        }
        let acc_at_exit = entry.acc_by_layer[(entry.exit_layer - 1) as usize];
        if (acc_at_exit - entry.acc_at_exit).abs() > 1e-9 {
            violations.push(format!("task '{task}': acc_at_exit mismatch"));
        }
    }
    if let Some((model, fingerprint)) = reference {
        if &artifact.model_fingerprint != fingerprint {
            violations.push(format!(
                "model_fingerprint {} does not match model file {fingerprint}",
                artifact.model_fingerprint
            ));
        }
        for (task, entry) in &artifact.tasks {
            if entry.num_layers != model.num_layers() {
                violations.push(format!(
                    "task '{task}': profiled {} layers, model has {}",
                    entry.num_layers,
                    model.num_layers()
                ));
            }
        }
    }
    Ok(violations)
}

fn validate_trace(path: &Path) -> Result<Vec<String>> {
    let trace = match artifacts::read_trace(path) {
        Ok(t) => t,
        Err(e) => return Ok(vec![format!("{e:#}")]),
    };
    let mut violations = Vec::new();
    let mut prev = 0u64;
    for (i, step) in trace.steps.iter().enumerate() {
        let ts = step.timestamp_ms();
        if i > 0 && ts < prev {
            violations.push(format!("step {i}: timestamp {ts} decreases (prev {prev})"));
        }
        prev = ts;
        if let TraceStep::Frame(f) = step {
            if f.active_tasks.is_empty() {
                violations.push(format!("step {i}: frame with no active tasks"));
            }
        }
    }
    Ok(violations)
}

fn validate_report(path: &Path) -> Result<Vec<String>> {
    let report = match artifacts::read_report(path) {
        Ok(r) => r,
        Err(e) => return Ok(vec![format!("{e:#}")]),
    };
    let mut violations = Vec::new();
    for row in &report.rows {
        if !(0.0..=1.0).contains(&row.accuracy) {
            violations.push(format!(
                "row ({}, {}): accuracy {} outside [0, 1]",
                row.strategy, row.task, row.accuracy
            ));
        }
        if row.sample_count == 0 {
            violations.push(format!(
                "row ({}, {}): zero samples",
                row.strategy, row.task
            ));
        }
    }
    Ok(violations)
}

fn validate_dataset(
    path: &Path,
    reference: Option<&(LayeredModel, String)>,
) -> Result<Vec<String>> {
    let Some((model, _)) = reference else {
        // Without a model there is no label set to bind against; check
        // structure only.
        let text = std::fs::read_to_string(path)?;
        let mut violations = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            if let Err(e) = serde_json::from_str::<serde_json::Value>(line) {
                violations.push(format!("line {}: {e}", lineno + 1));
            }
        }
        return Ok(violations);
    };
    let dataset = match artifacts::read_dataset_for_model(path, model) {
        Ok(d) => d,
        Err(e) => return Ok(vec![format!("{e:#}")]),
    };
    let mut violations = Vec::new();
    for sample in &dataset.samples {
        match (&sample.payload, model.backend()) {
            (earlyexit_core::dataset::SamplePayload::Features(f), ModelBackend::Synthetic(m)) => {
                if f.len() != m.hidden_dim() {
                    violations.push(format!(
                        "sample {}: {} features, model expects {}",
                        sample.sample_id,
                        f.len(),
                        m.hidden_dim()
                    ));
                }
            }
            (earlyexit_core::dataset::SamplePayload::TableRow(r), ModelBackend::Table(t)) => {
                if *r >= t.rows().len() {
                    violations.push(format!(
                        "sample {}: row {r} out of range ({} rows)",
                        sample.sample_id,
                        t.rows().len()
                    ));
                }
            }
            _ => violations.push(format!(
                "sample {}: payload kind does not match model backend",
                sample.sample_id
            )),
        }
    }
    Ok(violations)
}
