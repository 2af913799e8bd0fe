use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the holography toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid field: {0}")]
    InvalidField(String),

    #[error("dimension or metadata mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("negative intensity {value} at pixel {index}")]
    NegativeIntensity { index: usize, value: f64 },

    #[error("image mean is zero")]
    ZeroMean,

    #[error("image is all zero")]
    AllZero,

    #[error("image too small: {0}")]
    TooSmall(String),

    #[error("no contrast: focus criterion is flat over the searched range")]
    NoContrast,

    #[error("heights out of order after refinement: {0:?}")]
    HeightsOutOfOrder(Vec<f64>),

    #[error("field became non-finite during iteration {0}")]
    NonFiniteField(usize),

    #[error("invalid spec: {field}: {reason}")]
    InvalidSpec { field: String, reason: String },

    #[error("no peak found near ({x}, {y})")]
    NoPeak { x: usize, y: usize },

    #[error("corrupt file {path}: {reason}")]
    CorruptFile { path: PathBuf, reason: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn spec(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::InvalidSpec {
            field: field.into(),
            reason: reason.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn corrupt(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::CorruptFile {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
