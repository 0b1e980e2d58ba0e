//! IO companion for the early-exit engine: file formats, fixture
//! generation, validation, and the wall-clock benchmark harness. The binary
//! entry point (`earlyexit`) wires these into subcommands.

pub mod artifacts;
pub mod bench;
pub mod commands;
pub mod container;
pub mod fingerprint;
pub mod gen;
pub mod report_fmt;

/// Errors that reflect misuse of the command line rather than a domain
/// failure; the binary maps these to exit code 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for UsageError {}
