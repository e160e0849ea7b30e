use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum QmtError {
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("empty mini-batch")]
    EmptyBatch,
    #[error("parse error: {0}")]
    Parse(String),
    #[error("I/O error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl QmtError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        QmtError::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = QmtError> = std::result::Result<T, E>;
