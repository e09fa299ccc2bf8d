use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {}", .0.display())]
    UnsupportedFormat(PathBuf),
    #[error("corrupt image {}: {reason}", .path.display())]
    CorruptImage { path: PathBuf, reason: String },
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid parameter {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("empty input")]
    EmptyInput,
    #[error("empty region")]
    EmptyRegion,
    #[error("grid side {0} is odd")]
    OddSide(usize),
    #[error("grid side {side} is not divisible by 2^{levels}")]
    IncompatibleSize { side: usize, levels: u32 },

    #[error("empty training set")]
    EmptyTrainingSet,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("category {0} has no training samples")]
    EmptyCategory(String),
    #[error("training diverged at epoch {epoch}: loss {loss}")]
    NonFiniteLoss { epoch: usize, loss: f64 },
    #[error("empty test set")]
    EmptyTestSet,

    #[error("unknown keyword {0:?}")]
    UnknownKeyword(String),
    #[error("format error: {0}")]
    Format(String),
    #[error("index fingerprint {stored} does not match current model/parameters {current}")]
    FingerprintMismatch { stored: String, current: String },
    #[error("bad manifest line {line}: {reason}")]
    BadManifest { line: usize, reason: String },
}

impl Error {
    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
