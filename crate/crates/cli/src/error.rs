use std::path::PathBuf;

use pvar_core::{AlgebraError, ModelError, MomentError, OracleError, PhaseSpaceError, VariationalError};
use thiserror::Error;

/// Process exit codes. Anything unclassified (I/O) exits with 1.
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_CAPACITY: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error at {path}: {message}")]
    Config { path: String, message: String },
    #[error("capacity exceeded: {0}")]
    Capacity(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub fn config(path: impl Into<String>, message: impl ToString) -> Self {
        CliError::Config { path: path.into(), message: message.to_string() }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config { .. } => EXIT_CONFIG,
            CliError::Capacity(_) => EXIT_CAPACITY,
            CliError::Numerical(_) => EXIT_NUMERICAL,
            CliError::Io { .. } => 1,
        }
    }

    /// Classifies a core error raised while the section at `path` was in use.
    pub fn from_oracle(path: &str, e: OracleError) -> Self {
        match e {
            OracleError::DimensionCap { .. } | OracleError::CutoffTooSmall { .. } => CliError::Capacity(e.to_string()),
            OracleError::Degenerate { .. } => CliError::Numerical(e.to_string()),
            OracleError::ZeroCutoff { .. } | OracleError::ModeCountMismatch { .. } | OracleError::Algebra(_) => {
                CliError::config(path, e)
            }
        }
    }

    pub fn from_variational(path: &str, e: VariationalError) -> Self {
        match e {
            VariationalError::Moment(m) => Self::from_moment(path, m),
            VariationalError::ParameterLength { .. } => CliError::Numerical(e.to_string()),
            _ => CliError::config(path, e),
        }
    }

    pub fn from_moment(path: &str, e: MomentError) -> Self {
        match e {
            MomentError::Unphysical(_) => CliError::Numerical(e.to_string()),
            _ => CliError::config(path, e),
        }
    }

    pub fn from_phase_space(path: &str, e: PhaseSpaceError) -> Self {
        match e {
            PhaseSpaceError::Divergent { .. } => CliError::Numerical(e.to_string()),
            PhaseSpaceError::Moment(m) => Self::from_moment(path, m),
            _ => CliError::config(path, e),
        }
    }

    pub fn from_model(path: &str, e: ModelError) -> Self {
        CliError::config(path, e)
    }

    pub fn from_algebra(path: &str, e: AlgebraError) -> Self {
        CliError::config(path, e)
    }
}
