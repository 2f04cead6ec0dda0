use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the sprayer pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Raster header or payload does not follow the on-disk format.
    #[error("malformed raster: {0}")]
    Format(String),

    #[error("class out of range: value {value} at pixel {index}")]
    ClassOutOfRange { value: u8, index: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario validation failed: {0}")]
    Scenario(String),

    #[error("simulation failure: {0}")]
    Runtime(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: (usize, usize), actual: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected: format!("{}x{}", expected.0, expected.1),
            actual: format!("{}x{}", actual.0, actual.1),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
