use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed MetaImage header {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("raw data {path} holds {actual} bytes, expected {expected}")]
    Truncated {
        path: PathBuf,
        expected: usize,
        actual: usize,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate prior: {0}")]
    DegeneratePrior(String),

    #[error("generator failed: {0}")]
    Generator(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
