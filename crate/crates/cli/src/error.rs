use serde_json::json;
use thiserror::Error;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_COMPARISON: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Solver(#[from] dicke_core::Error),
    #[error("{0}")]
    Comparison(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serialize(String),
}

impl From<serde_json::Error> for CliError {
    fn from(e: serde_json::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Serialize(e.to_string())
    }
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::Io(_) => EXIT_USAGE,
            CliError::Solver(dicke_core::Error::InvalidArgument(_)) => EXIT_USAGE,
            CliError::Solver(_) | CliError::Serialize(_) => EXIT_NUMERICAL,
            CliError::Comparison(_) => EXIT_COMPARISON,
        }
    }

    pub fn kind(&self) -> &'static str {
        use dicke_core::Error as E;
        match self {
            CliError::Usage(_) => "usage",
            CliError::Io(_) => "io",
            CliError::Serialize(_) => "serialization",
            CliError::Comparison(_) => "comparison_failed",
            CliError::Solver(e) => match e {
                E::InvalidArgument(_) => "invalid_argument",
                E::PrecisionFailure { .. } => "precision_failure",
                E::Truncation { .. } => "truncation",
                E::EnumerationCap { .. } => "enumeration_cap",
                E::UnsupportedDegeneracy => "unsupported_degeneracy",
                E::Stiffness { .. } => "stiffness",
                E::Singularity { .. } => "singularity",
                E::GridTooCoarse(_) => "grid_too_coarse",
            },
        }
    }

    /// One-line JSON error object for stderr.
    pub fn to_json(&self) -> String {
        json!({ "error": { "kind": self.kind(), "message": self.to_string(), "exit_code": self.exit_code() } })
            .to_string()
    }
}

pub type CliResult<T> = Result<T, CliError>;
