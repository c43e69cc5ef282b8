use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("offset {offset} rad/s lies outside the band of +/-{edge} rad/s")]
    OutOfBand { offset: f64, edge: f64 },

    #[error("dimension mismatch: expected {expected}, found {found} ({what})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("missing dependency: {0}")]
    MissingDependency(String),

    #[error("unsupported schema version {found} (supported: {supported})")]
    UnsupportedVersion { found: u64, supported: u64 },

    #[error("malformed {what}: {message}")]
    Malformed { what: &'static str, message: String },

    #[error("corrupted checkpoint at {path}: {message}")]
    CorruptCheckpoint { path: PathBuf, message: String },

    #[error("run interrupted after {completed} optimizations")]
    Interrupted { completed: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
