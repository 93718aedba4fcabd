use std::path::PathBuf;

use edgebatch_core::FormatError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Schema { path: PathBuf, source: FormatError },
    #[error("{path}: {reason}")]
    Input { path: PathBuf, reason: String },
    #[error("certification failed: {0}")]
    Certification(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl CliError {
    /// 0 ok, 1 usage or I/O, 2 schema, 3 certification failure.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) | CliError::Io(_) | CliError::Csv(_) => 1,
            CliError::Schema { .. } | CliError::Input { .. } => 2,
            CliError::Certification(_) => 3,
        }
    }
}
