use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{field}`: {reason}")]
    InvalidParameter { field: &'static str, reason: String },

    #[error("cannot realize transfer function: {0}")]
    Representation(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("non-finite input: {0}")]
    NonFiniteInput(String),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset contains non-finite values")]
    NonFiniteData,

    #[error("insufficient data: need more than {needed} samples, got {actual}")]
    InsufficientData { needed: usize, actual: usize },

    #[error("identification failed: {0}")]
    IdentificationFailed(String),

    #[error("training failed at epoch {epoch}: {reason}")]
    TrainingFailed { epoch: usize, reason: String },

    #[error("controller fault at step {step}: {reason}")]
    ControllerFault { step: usize, reason: String },

    #[error("metric `{metric}` undefined: {reason}")]
    MetricUndefined { metric: &'static str, reason: String },

    #[error("parse error at line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn param(field: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            field,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
