use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid bearing geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid spec: {0}")]
    InvalidSpec(String),

    #[error("invalid range: {0}")]
    InvalidRange(String),

    #[error("invalid label {label} (expected 0..{classes})")]
    InvalidLabel { label: usize, classes: usize },

    #[error("invalid shape: {0}")]
    InvalidShape(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch { expected: Vec<usize>, actual: Vec<usize> },

    #[error("state error: {0}")]
    State(String),

    #[error("stratification error: {0}")]
    Stratification(String),

    #[error("channel `{channel}` is constant (zero standard deviation)")]
    ConstantChannel { channel: String },

    #[error("parse error at record {record}: {message}")]
    Parse { record: usize, message: String },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("freeze plan error: {0}")]
    Plan(String),

    #[error("config error at `{field}`: {message}")]
    Config { field: String, message: String },

    #[error("undefined AUC: {0}")]
    UndefinedAuc(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn config(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            message: message.into(),
        }
    }
}
