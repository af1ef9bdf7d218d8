use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("singular parameter: {0}")]
    SingularParameter(String),

    #[error("dimension {dim} exceeds the configured cap of {cap}")]
    DimensionCap { dim: usize, cap: usize },

    #[error("dimension mismatch: operator has dim {operator}, state has dim {state}")]
    DimensionMismatch { operator: usize, state: usize },

    #[error("non-finite operator entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("state is not normalized: norm² = {0}")]
    NotNormalized(f64),

    #[error("{0}")]
    Analysis(String),

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
