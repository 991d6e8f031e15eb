use std::path::PathBuf;

use thiserror::Error;

/// Process exit codes. A test decision maps to 0 (accept) or 3 (reject).
pub mod code {
    pub const ACCEPT: i32 = 0;
    pub const CHECK_FAILED: i32 = 1;
    pub const REJECT: i32 = 3;
    pub const COVERAGE: i32 = 4;
    pub const INVALID: i32 = 5;
    pub const IO: i32 = 6;
    pub const EXPERIMENT: i32 = 7;
    pub const USAGE: i32 = 64;
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] smoothtest_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}: {message}", path.display())]
    Json { path: PathBuf, message: String },

    #[error("{0}")]
    Usage(String),

    #[error("check failed: {0}")]
    CheckFailed(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    pub fn exit_code(&self) -> i32 {
        use smoothtest_core::Error as E;
        match self {
            CliError::Core(E::Coverage { .. }) => code::COVERAGE,
            CliError::Core(E::Parse(_)) | CliError::Io { .. } | CliError::Json { .. } => code::IO,
            CliError::Core(E::Bisection { .. }) => code::EXPERIMENT,
            CliError::Core(_) => code::INVALID,
            CliError::Usage(_) => code::USAGE,
            CliError::CheckFailed(_) => code::CHECK_FAILED,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
