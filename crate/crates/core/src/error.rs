use thiserror::Error;

/// Errors raised anywhere in the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },
    #[error("dimension mismatch: expected {expected}, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("true parameters are required but the history carries none")]
    MissingTruth,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("action set is empty")]
    EmptyActionSet,
    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("context pool '{0}' is empty")]
    EmptyPool(String),
    #[error("episode failed at step {step}: {source}")]
    Episode {
        step: usize,
        #[source]
        source: Box<Error>,
    },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn dim(expected: usize, found: usize) -> Self {
        Error::DimensionMismatch { expected, found }
    }

    pub(crate) fn io(path: impl AsRef<std::path::Path>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.as_ref().display().to_string(),
            source,
        }
    }

    /// True for errors caused by an invalid experiment description rather
    /// than a runtime failure.
    pub fn is_config_error(&self) -> bool {
        matches!(
            self,
            Error::InvalidConfig(_) | Error::Parse { .. } | Error::EmptyPool(_)
        )
    }
}
