//! Early-exit inference engine for layered classifiers.
//!
//! A layered classifier applies a stack of layers to an embedded input and
//! reads a shared prediction head at any depth. This crate provides:
//!
//! - [`model`] — the layered-model abstraction with two backends (a synthetic
//!   transformer with real per-layer compute, and an exact prediction table)
//!   plus activated-parameter accounting.
//! - [`profiler`] — layer-wise accuracy profiling over a labeled dataset and
//!   aggressive statistical selection of the earliest exit layer whose
//!   accuracy matches the full model.
//! - [`executor`] — inference under an exit strategy: full depth, a fixed
//!   exit layer, confidence-threshold or stable-prediction adaptive exits,
//!   and a fixed-fraction baseline.
//! - [`router`] — scene-context state driven by navigation events, resolving
//!   the exit configuration to apply at any instant.
//! - [`sim`] — drive-trace replay through router and executor with a modeled
//!   latency budget, producing per-strategy per-task reports.
//!
//! The crate is `no_std` (with `alloc`); all IO, file formats, and the CLI
//! live in the companion `earlyexit-cli` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod dataset;
pub mod error;
pub mod executor;
pub mod math;
pub mod model;
pub mod profiler;
pub mod rng;
pub mod router;
pub mod sim;

pub use dataset::{Dataset, Sample, SamplePayload};
pub use error::{Error, Result};
pub use executor::{batch_run, run, BatchSummary, ExitStrategy, InferenceResult};
pub use model::{LabelId, LabelSet, LayeredModel, ParamModel};
pub use profiler::{
    layerwise_accuracy, profile_tasks, select_exit_layer, AccuracyProfile, ExitSelection,
    TaskProfiles,
};
pub use router::{ExitConfigTable, NavEvent, RouterState, SceneCategory};
pub use sim::{
    latency, over_inference_analysis, reduction_pct, simulate, DriveTrace, FrameArrival,
    LatencyModel, SimReport, TraceStep,
};
