//! Error type shared across the engine.

use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

/// Result alias used throughout the crate.
pub type Result<T> = core::result::Result<T, Error>;

/// Errors raised by model backends, profiling, execution, routing, and
/// simulation.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// Input feature vector does not match the model input dimension.
    InputShape { expected: usize, got: usize },
    /// Layer index outside `[1, num_layers]` (or `[0, num_layers]` where
    /// layer 0 is meaningful).
    LayerIndex { layer: u32, num_layers: u32 },
    /// Table-backend sample references a row that does not exist.
    RowOutOfRange { row: usize, rows: usize },
    /// An operation that requires at least one sample received none.
    /// The payload names the offending input (e.g. a task id).
    EmptyInput(String),
    /// A ground-truth label is outside the model label set.
    LabelDomain(String),
    /// A sample was handed to a profiler call for a different task.
    TaskMismatch { expected: String, got: String },
    /// Exit-strategy parameters are invalid for the bound model.
    StrategyConfig(String),
    /// Navigation event timestamp precedes the router's last event.
    EventOrder { last_ms: u64, event_ms: u64 },
    /// A configuration artifact failed validation; names the entry.
    ConfigValidation(String),
    /// Trace step references a sample id absent from the bound dataset.
    TraceBinding { step: usize, sample_id: u64 },
    /// Trace timestamps decrease at the named step.
    TraceOrder { step: usize },
    /// Percentage reduction over a non-positive baseline.
    NonpositiveBase,
    /// Operation not meaningful for this backend (e.g. wall-clock
    /// benchmarking a prediction table).
    UnsupportedBackend(&'static str),
    /// A report is missing data a comparison requires.
    ReportShape(String),
    /// Generator spec fields are out of range; lists every offending field.
    SpecValidation(Vec<String>),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InputShape { expected, got } => {
                write!(f, "input shape mismatch: expected {expected} features, got {got}")
            }
            Error::LayerIndex { layer, num_layers } => {
                write!(f, "layer index {layer} out of range for {num_layers}-layer model")
            }
            Error::RowOutOfRange { row, rows } => {
                write!(f, "table row {row} out of range ({rows} rows)")
            }
            Error::EmptyInput(what) => write!(f, "empty input: {what}"),
            Error::LabelDomain(label) => write!(f, "label outside model label set: {label}"),
            Error::TaskMismatch { expected, got } => {
                write!(f, "sample tagged task '{got}' passed to profiler for task '{expected}'")
            }
            Error::StrategyConfig(msg) => write!(f, "invalid exit strategy: {msg}"),
            Error::EventOrder { last_ms, event_ms } => write!(
                f,
                "out-of-order nav event: timestamp {event_ms}ms precedes last event {last_ms}ms"
            ),
            Error::ConfigValidation(msg) => write!(f, "config validation failed: {msg}"),
            Error::TraceBinding { step, sample_id } => {
                write!(f, "trace step {step}: sample id {sample_id} not in dataset")
            }
            Error::TraceOrder { step } => {
                write!(f, "trace step {step}: timestamp decreases")
            }
            Error::NonpositiveBase => write!(f, "reduction baseline must be positive"),
            Error::UnsupportedBackend(op) => write!(f, "operation '{op}' unsupported for this backend"),
            Error::ReportShape(msg) => write!(f, "report shape error: {msg}"),
            Error::SpecValidation(fields) => {
                write!(f, "invalid spec fields: ")?;
                for (i, field) in fields.iter().enumerate() {
                    if i > 0 {
                        write!(f, "; ")?;
                    }
                    write!(f, "{field}")?;
                }
                Ok(())
            }
        }
    }
}

impl core::error::Error for Error {}
