//! Experiment runner for the tree maximal operator toolkit.
//!
//! `blab` exposes the library as subcommands plus a JSON-driven experiment
//! runner. Outputs are JSON or CSV, written atomically.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod args;
pub mod artifact;
pub mod error;
pub mod fuzz;
pub mod spec;
pub mod trend;

pub use error::{CliError, CliResult};
pub use spec::{execute, ExperimentSpec, Kind};

/// Runs one spec end to end and writes its artifact.
///
/// An invariant violation found during the run is reported after the
/// artifact is written, so the evidence survives.
pub fn run(spec: &ExperimentSpec) -> CliResult<()> {
    let outcome = execute(spec)?;
    artifact::emit(&outcome.artifact, spec.output.path.as_deref(), spec.output.format)?;
    match outcome.violation {
        Some(msg) => Err(CliError::Violation(msg)),
        None => Ok(()),
    }
}
