use std::path::PathBuf;

use serde_json::json;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] blab_core::Error),
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
    /// The run finished and wrote its artifact, but found a broken invariant.
    #[error("invariant violated: {0}")]
    Violation(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }

    pub fn exit_code(&self) -> i32 {
        use blab_core::Error as E;
        match self {
            CliError::Usage(_) | CliError::Io { .. } | CliError::Json { .. } => EXIT_USAGE,
            CliError::Core(
                E::InvalidArity(_)
                | E::InvalidPartition { .. }
                | E::InvalidMass(_)
                | E::InvalidLevel { .. }
                | E::UnknownNode(_)
                | E::DomainMismatch(_)
                | E::InvalidFunction(_)
                | E::InvalidExponent(_)
                | E::InvalidThreshold(_)
                | E::Domain(_)
                | E::InfeasibleMoments { .. }
                | E::InvalidConfig(_),
            ) => EXIT_USAGE,
            CliError::Core(_) | CliError::Csv(_) | CliError::Violation(_) => EXIT_NUMERIC,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Core(e) => e.kind(),
            CliError::Io { .. } => "io",
            CliError::Json { .. } => "json",
            CliError::Csv(_) => "csv",
            CliError::Violation(_) => "invariant-violation",
        }
    }

    /// One-line JSON object for standard error.
    pub fn diagnostic(&self) -> String {
        json!({
            "error": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        })
        .to_string()
    }
}
