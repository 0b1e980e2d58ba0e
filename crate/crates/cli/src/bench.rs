//! Wall-clock benchmark harness.
//!
//! Modeled latency (the simulator) proves the arithmetic; this harness
//! proves the savings are real. It times single inferences on the
//! synthetic-transformer backend, cycling through the dataset, and reports
//! the median over repetitions after a warmup. The table backend has no
//! meaningful compute and is rejected.

use std::time::Instant;

use anyhow::{bail, Result};

use earlyexit_core::dataset::Dataset;
use earlyexit_core::error::Error;
use earlyexit_core::executor::{run, ExitStrategy};
use earlyexit_core::model::LayeredModel;

#[derive(Debug, Clone, Copy)]
pub struct BenchConfig {
    pub reps: u32,
    pub warmup: u32,
}

#[derive(Debug, Clone)]
pub struct BenchRow {
    pub strategy: String,
    pub median_ms: f64,
    pub mean_layers: f64,
    /// Median wall-clock relative to full inference.
    pub ratio_to_full: f64,
}

#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub reps: u32,
    pub warmup: u32,
}

/// Times each strategy; full inference is always measured so ratios have a
/// denominator, even when absent from `strategies`.
pub fn bench(
    model: &LayeredModel,
    dataset: &Dataset,
    strategies: &[ExitStrategy],
    config: BenchConfig,
) -> Result<BenchReport> {
    if model.input_dim().is_none() {
        return Err(Error::UnsupportedBackend("bench").into());
    }
    if dataset.is_empty() {
        return Err(Error::EmptyInput("dataset".into()).into());
    }
    if config.reps == 0 {
        bail!("bench requires at least one repetition");
    }
    for strategy in strategies {
        strategy.validate(model.num_layers())?;
    }

    let full_median = measure(model, dataset, &ExitStrategy::Full, config)?.0;
    let mut rows = Vec::with_capacity(strategies.len());
    for strategy in strategies {
        let (median_ms, mean_layers) = if *strategy == ExitStrategy::Full {
            (full_median, model.num_layers() as f64)
        } else {
            measure(model, dataset, strategy, config)?
        };
        rows.push(BenchRow {
            strategy: strategy.canonical_name(),
            median_ms,
            mean_layers,
            ratio_to_full: median_ms / full_median,
        });
    }
    Ok(BenchReport {
        rows,
        reps: config.reps,
        warmup: config.warmup,
    })
}

fn measure(
    model: &LayeredModel,
    dataset: &Dataset,
    strategy: &ExitStrategy,
    config: BenchConfig,
) -> Result<(f64, f64)> {
    let samples = &dataset.samples;
    for i in 0..config.warmup {
        let sample = &samples[i as usize % samples.len()];
        std::hint::black_box(run(model, sample, strategy, false)?);
    }
    let mut times = Vec::with_capacity(config.reps as usize);
    let mut layer_sum = 0u64;
    for i in 0..config.reps {
        let sample = &samples[i as usize % samples.len()];
        let start = Instant::now();
        let result = std::hint::black_box(run(model, sample, strategy, false)?);
        times.push(start.elapsed().as_secs_f64() * 1000.0);
        layer_sum += result.layers_executed as u64;
    }
    Ok((
        median(&mut times),
        layer_sum as f64 / config.reps as f64,
    ))
}

fn median(times: &mut [f64]) -> f64 {
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = times.len();
    if n % 2 == 1 {
        times[n / 2]
    } else {
        (times[n / 2 - 1] + times[n / 2]) / 2.0
    }
}
