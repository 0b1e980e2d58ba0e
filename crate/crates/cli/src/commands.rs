//! Subcommand implementations behind the `earlyexit` binary.

pub mod validate;

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{anyhow, bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use earlyexit_core::dataset::Dataset;
use earlyexit_core::executor::{run as run_inference, ExitStrategy};
use earlyexit_core::model::LayeredModel;
use earlyexit_core::profiler::{
    layerwise_accuracy, merge_counts, select_exit_layer, AccuracyProfile, TaskProfiles,
};
use earlyexit_core::router::RouterState;
use earlyexit_core::sim::simulate;

use crate::artifacts;
use crate::bench::{bench, BenchConfig};
use crate::container;
use crate::fingerprint::fingerprint_file;
use crate::gen;
use crate::report_fmt;
use crate::UsageError;

/// Environment variable forcing the worker-thread count where a command
/// supports parallelism (currently `profile`). A `--parallel` flag wins
/// over the variable.
pub const THREADS_ENV: &str = "EARLYEXIT_THREADS";

/// Early-exit engine for layered classifiers: fixture generation, offline
/// profiling, strategy execution, drive-trace simulation, and wall-clock
/// benchmarking.
#[derive(Debug, Parser)]
#[command(name = "earlyexit", version, max_term_width = 100)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a model file and matching dataset from a spec file.
    #[command(name = "gen-synthetic")]
    GenSynthetic(GenArgs),
    /// Profile layer-wise accuracy per task and select exit layers.
    Profile(ProfileArgs),
    /// Print exit-layer selections from a profile artifact.
    Select(SelectArgs),
    /// Run inference over a dataset under one exit strategy.
    Run(RunArgs),
    /// Replay a drive trace through router and executor.
    Simulate(SimulateArgs),
    /// Render a simulation report as CSV or an aligned text table.
    Report(ReportArgs),
    /// Measure median wall-clock per inference per strategy.
    Bench(BenchArgs),
    /// Validate an artifact file and report violations.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Spec file (JSON; kind = synthetic | table).
    #[arg(long)]
    pub spec: PathBuf,
    /// Output model container path.
    #[arg(long)]
    pub out_model: PathBuf,
    /// Output dataset path (JSONL).
    #[arg(long)]
    pub out_data: PathBuf,
}

#[derive(Debug, Args)]
pub struct ProfileArgs {
    /// Model container.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled dataset (JSONL).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Output profile artifact (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Worker threads for the profiling pass (default: EARLYEXIT_THREADS
    /// or 1). Results are identical at any thread count.
    #[arg(long)]
    pub parallel: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Profile artifact (JSON).
    #[arg(long)]
    pub profile: PathBuf,
    /// Restrict output to one task.
    #[arg(long)]
    pub task: Option<String>,
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Model container.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled dataset (JSONL).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Exit strategy: full | fixed:L | conf:T[:MIN] | stable:K[:MIN] | frac:R.
    #[arg(long)]
    pub strategy: String,
    /// Include the per-layer (label, confidence) trace in each record.
    #[arg(long)]
    pub trace: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Model container.
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled dataset (JSONL).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Drive trace (JSONL).
    #[arg(long)]
    pub trace: PathBuf,
    /// Scene config (JSON) referencing a profile artifact.
    #[arg(long)]
    pub config: PathBuf,
    /// Latency model (JSON).
    #[arg(long)]
    pub latency: PathBuf,
    /// Output report path (JSON).
    #[arg(long)]
    pub out: PathBuf,
    /// Comparison strategies to run alongside the routed condition
    /// (comma-separated; default: full).
    #[arg(long, default_value = "full")]
    pub compare: String,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ReportFormat {
    Csv,
    Text,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Simulation report (JSON).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Output format.
    #[arg(long, value_enum)]
    pub format: ReportFormat,
}

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Model container (synthetic backend only).
    #[arg(long)]
    pub model: PathBuf,
    /// Labeled dataset (JSONL).
    #[arg(long)]
    pub dataset: PathBuf,
    /// Strategies to time (comma-separated).
    #[arg(long)]
    pub strategies: String,
    /// Timed repetitions per strategy.
    #[arg(long)]
    pub reps: u32,
    /// Untimed warmup repetitions per strategy.
    #[arg(long, default_value_t = 10)]
    pub warmup: u32,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Artifact to validate (model, dataset, profile, trace, latency
    /// model, scene config, or report; the type is detected).
    #[arg(long = "in")]
    pub input: PathBuf,
    /// Cross-reference against this model file (fingerprints, label
    /// bindings, layer counts).
    #[arg(long)]
    pub model: Option<PathBuf>,
}

pub fn dispatch(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenSynthetic(args) => cmd_gen(args),
        Command::Profile(args) => cmd_profile(args),
        Command::Select(args) => cmd_select(args),
        Command::Run(args) => cmd_run(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Report(args) => cmd_report(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Validate(args) => validate::cmd_validate(args),
    }
}

fn load_model_and_dataset(model: &Path, dataset: &Path) -> Result<(LayeredModel, Dataset)> {
    let model = container::read_model(model)?;
    let dataset = artifacts::read_dataset_for_model(dataset, &model)?;
    Ok((model, dataset))
}

fn parse_strategy_list(list: &str) -> Result<Vec<ExitStrategy>> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| Ok(ExitStrategy::parse(s.trim())?))
        .collect()
}

fn cmd_gen(args: GenArgs) -> Result<()> {
    let spec = gen::read_gen_spec(&args.spec)?;
    let (model, dataset) = gen::build(&spec)?;
    container::write_model(&args.out_model, &model)?;
    artifacts::write_dataset(&args.out_data, &dataset, model.label_set())?;
    eprintln!(
        "model: {} ({})",
        args.out_model.display(),
        fingerprint_file(&args.out_model)?
    );
    eprintln!(
        "dataset: {} ({} samples, {})",
        args.out_data.display(),
        dataset.len(),
        fingerprint_file(&args.out_data)?
    );
    Ok(())
}

fn thread_count(flag: Option<usize>) -> Result<usize> {
    let n = match flag {
        Some(n) => n,
        None => match std::env::var(THREADS_ENV) {
            Ok(v) => v
                .parse::<usize>()
                .map_err(|_| UsageError(format!("{THREADS_ENV}='{v}' is not a thread count")))?,
            Err(_) => 1,
        },
    };
    if n == 0 {
        return Err(UsageError("thread count must be >= 1".into()).into());
    }
    Ok(n)
}

fn cmd_profile(args: ProfileArgs) -> Result<()> {
    let (model, dataset) = load_model_and_dataset(&args.model, &args.dataset)?;
    let threads = thread_count(args.parallel)?;
    let profiles = profile_parallel(&model, &dataset, threads)?;
    let fingerprint = fingerprint_file(&args.model)?;
    let artifact = artifacts::ProfileArtifact::from_profiles(&profiles, fingerprint);
    artifacts::write_profile(&args.out, &artifact)?;
    for (task, (profile, selection)) in &profiles.entries {
        eprintln!(
            "{task}: exit layer {} of {} (acc {:.4} vs full {:.4}, strict {}, n={})",
            selection.exit_layer,
            profile.num_layers(),
            selection.acc_at_exit,
            profile.full_accuracy,
            selection.satisfied_strictly,
            profile.sample_count
        );
    }
    Ok(())
}

/// Shards each task partition across threads and merges the integer count
/// vectors; the merge is order-independent, so output is identical to the
/// single-threaded pass.
pub fn profile_parallel(
    model: &LayeredModel,
    dataset: &Dataset,
    threads: usize,
) -> Result<TaskProfiles> {
    if threads <= 1 {
        return Ok(earlyexit_core::profiler::profile_tasks(model, dataset)?);
    }
    if dataset.is_empty() {
        return Err(earlyexit_core::Error::EmptyInput("dataset".into()).into());
    }
    let mut entries = BTreeMap::new();
    for (task, samples) in dataset.partition_by_task() {
        let num_layers = model.num_layers() as usize;
        let chunk = samples.len().div_ceil(threads);
        let shards: Vec<Vec<u32>> = std::thread::scope(|scope| {
            let handles: Vec<_> = samples
                .chunks(chunk)
                .map(|shard| {
                    scope.spawn(move || {
                        layerwise_accuracy(model, shard, task).map(|p| p.correct_counts)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("profiling shard panicked"))
                .collect::<earlyexit_core::Result<Vec<_>>>()
        })?;
        let mut counts = vec![0u32; num_layers];
        for shard in &shards {
            merge_counts(&mut counts, shard);
        }
        let profile =
            AccuracyProfile::from_counts(task.to_string(), samples.len() as u32, counts)?;
        let selection = select_exit_layer(&profile);
        entries.insert(task.to_string(), (profile, selection));
    }
    Ok(TaskProfiles { entries })
}

fn cmd_select(args: SelectArgs) -> Result<()> {
    let artifact = artifacts::read_profile(&args.profile)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let mut found = false;
    for (task, entry) in &artifact.tasks {
        if let Some(filter) = &args.task {
            if task != filter {
                continue;
            }
        }
        found = true;
        writeln!(
            out,
            "{task}: exit_layer={} strict={} acc_at_exit={:.4} full_accuracy={:.4} n={} L={}",
            entry.exit_layer,
            entry.satisfied_strictly,
            entry.acc_at_exit,
            entry.full_accuracy,
            entry.sample_count,
            entry.num_layers
        )?;
    }
    if !found {
        match &args.task {
            Some(task) => bail!("task '{task}' not present in profile"),
            None => bail!("profile contains no tasks"),
        }
    }
    Ok(())
}

#[derive(serde::Serialize)]
struct RunRecord<'a> {
    sample_id: u64,
    task_id: &'a str,
    predicted: &'a str,
    correct: bool,
    exit_layer: u32,
    layers_executed: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    trace: Option<Vec<RunTraceEntry<'a>>>,
}

#[derive(serde::Serialize)]
struct RunTraceEntry<'a> {
    layer: u32,
    label: &'a str,
    confidence: f32,
}

fn cmd_run(args: RunArgs) -> Result<()> {
    let (model, dataset) = load_model_and_dataset(&args.model, &args.dataset)?;
    if dataset.is_empty() {
        return Err(earlyexit_core::Error::EmptyInput("dataset".into()).into());
    }
    let strategy = ExitStrategy::parse(&args.strategy)?;
    strategy.validate(model.num_layers())?;

    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let labels = model.label_set();
    let mut correct = 0u64;
    let mut layer_sum = 0u64;
    for sample in &dataset.samples {
        let result = run_inference(&model, sample, &strategy, args.trace)?;
        let is_correct = result.predicted == sample.ground_truth;
        correct += u64::from(is_correct);
        layer_sum += result.layers_executed as u64;
        let record = RunRecord {
            sample_id: sample.sample_id,
            task_id: &sample.task_id,
            predicted: labels
                .name(result.predicted)
                .ok_or_else(|| anyhow!("predicted label out of range"))?,
            correct: is_correct,
            exit_layer: result.exit_layer_used,
            layers_executed: result.layers_executed,
            trace: result.per_layer_trace.as_ref().map(|entries| {
                entries
                    .iter()
                    .map(|e| RunTraceEntry {
                        layer: e.layer,
                        label: labels.name(e.label).unwrap_or("?"),
                        confidence: e.confidence,
                    })
                    .collect()
            }),
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    let n = dataset.len() as f64;
    eprintln!(
        "strategy {}: accuracy {:.4}, mean layers {:.2} over {} samples",
        strategy.canonical_name(),
        correct as f64 / n,
        layer_sum as f64 / n,
        dataset.len()
    );
    Ok(())
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let (model, dataset) = load_model_and_dataset(&args.model, &args.dataset)?;
    let trace = artifacts::read_trace(&args.trace)?;
    let latency_model = artifacts::read_latency(&args.latency)?;
    let config = artifacts::read_scene_config(&args.config)?;

    let profile_path = config.profile_path(&args.config);
    let profile = artifacts::read_profile(&profile_path)?;
    let model_fingerprint = fingerprint_file(&args.model)?;
    if profile.model_fingerprint != model_fingerprint {
        bail!(
            "profile {} was built for a different model (profile fingerprint {}, model {})",
            profile_path.display(),
            profile.model_fingerprint,
            model_fingerprint
        );
    }
    let profiles = profile.to_profiles()?;
    let table = config.build_table(&profiles, model.num_layers())?;
    let router = RouterState::new(table);
    let comparisons = parse_strategy_list(&args.compare)?;

    let started = Instant::now();
    let report = simulate(&trace, &dataset, &model, router, &latency_model, &comparisons)?;
    let wall_ms = started.elapsed().as_secs_f64() * 1000.0;

    artifacts::write_report(&args.out, &report)?;
    eprintln!(
        "simulated {} requests across {} rows, {} scene switches, wall time {:.1} ms",
        report.frame_log.len(),
        report.rows.len(),
        report.switch_count,
        wall_ms
    );
    Ok(())
}

fn cmd_report(args: ReportArgs) -> Result<()> {
    let report = artifacts::read_report(&args.input)?;
    let rendered = match args.format {
        ReportFormat::Csv => report_fmt::to_csv(&report)?,
        ReportFormat::Text => report_fmt::to_text(&report)?,
    };
    print!("{rendered}");
    Ok(())
}

fn cmd_bench(args: BenchArgs) -> Result<()> {
    if args.reps == 0 {
        return Err(UsageError("--reps must be >= 1".into()).into());
    }
    let (model, dataset) = load_model_and_dataset(&args.model, &args.dataset)?;
    let strategies = parse_strategy_list(&args.strategies)?;
    if strategies.is_empty() {
        return Err(UsageError("--strategies is empty".into()).into());
    }
    let report = bench(
        &model,
        &dataset,
        &strategies,
        BenchConfig {
            reps: args.reps,
            warmup: args.warmup,
        },
    )?;
    println!(
        "{:<16} {:>12} {:>12} {:>14}",
        "strategy", "median_ms", "mean_layers", "ratio_to_full"
    );
    for row in &report.rows {
        println!(
            "{:<16} {:>12.4} {:>12.2} {:>14.3}",
            row.strategy, row.median_ms, row.mean_layers, row.ratio_to_full
        );
    }
    eprintln!("reps {}, warmup {}", report.reps, report.warmup);
    Ok(())
}
