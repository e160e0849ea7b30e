use std::path::PathBuf;

use qmt_core::QmtError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] QmtError),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    /// 2 for bad configuration or arguments, 3 for numeric failures,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(QmtError::Numeric(_)) => 3,
            CliError::Core(QmtError::InvalidArgument(_) | QmtError::Dimension(_) | QmtError::Parse(_)) => 2,
            CliError::Core(QmtError::EmptyBatch) => 2,
            CliError::Core(QmtError::Io { .. }) | CliError::Io { .. } => 1,
        }
    }
}
