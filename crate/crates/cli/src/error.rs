use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] xoutrade_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Data { path: PathBuf, message: String },

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("serialization: {0}")]
    Serialize(String),
}

impl CliError {
    /// 2 for bad input, 3 for solver failures, 4 for failed verification.
    pub fn exit_code(&self) -> i32 {
        use xoutrade_core::Error as E;
        match self {
            CliError::Config(_) | CliError::Data { .. } | CliError::Io { .. } => 2,
            CliError::Core(E::InvalidInput { .. } | E::Calibration(_)) => 2,
            CliError::Core(_) => 3,
            CliError::Verification(_) => 4,
            CliError::Serialize(_) => 1,
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
