use thiserror::Error;

use crate::tree::NodeId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid arity {0}: every internal node needs at least two children")]
    InvalidArity(usize),
    #[error("invalid partition: child fractions sum to {sum}, expected 1")]
    InvalidPartition { sum: f64 },
    #[error("invalid mass {0}: masses must be positive and finite")]
    InvalidMass(f64),
    #[error("invalid level {level}: tree depth is {depth}")]
    InvalidLevel { level: usize, depth: usize },
    #[error("unknown node {0}")]
    UnknownNode(NodeId),
    #[error("function and tree do not match: {0}")]
    DomainMismatch(String),
    #[error("invalid function: {0}")]
    InvalidFunction(String),
    #[error("invalid exponent p = {0}")]
    InvalidExponent(f64),
    #[error("invalid threshold {0}: must be positive")]
    InvalidThreshold(f64),
    #[error("degenerate input: {0}")]
    DegenerateInput(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("infeasible moments: f^p = {f_pow} exceeds F = {big_f}")]
    InfeasibleMoments { f_pow: f64, big_f: f64 },
    #[error("x = {0} is too close to 1, where the derivative identity is singular")]
    SingularityGuard(f64),
    #[error("cannot normalize: {0}")]
    CannotNormalize(String),
    #[error("numeric failure: {0}")]
    NumericFailure(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("invariant violated: {0}")]
    InvariantViolation(String),
}

impl Error {
    /// Short machine-readable tag, used in diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidArity(_) => "invalid-arity",
            Error::InvalidPartition { .. } => "invalid-partition",
            Error::InvalidMass(_) => "invalid-mass",
            Error::InvalidLevel { .. } => "invalid-level",
            Error::UnknownNode(_) => "unknown-node",
            Error::DomainMismatch(_) => "domain-mismatch",
            Error::InvalidFunction(_) => "invalid-function",
            Error::InvalidExponent(_) => "invalid-exponent",
            Error::InvalidThreshold(_) => "invalid-threshold",
            Error::DegenerateInput(_) => "degenerate-input",
            Error::Domain(_) => "domain-error",
            Error::InfeasibleMoments { .. } => "infeasible-moments",
            Error::SingularityGuard(_) => "singularity-guard",
            Error::CannotNormalize(_) => "cannot-normalize",
            Error::NumericFailure(_) => "numeric-failure",
            Error::InvalidConfig(_) => "invalid-config",
            Error::InvariantViolation(_) => "invariant-violation",
        }
    }
}
