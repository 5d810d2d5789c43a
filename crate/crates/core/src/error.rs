use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("row {row}, column {column}: cannot parse {token:?} as a category")]
    Parse {
        row: usize,
        column: usize,
        token: String,
    },

    #[error("row {row}, column {column}: code {code} is outside 0..{cardinality}")]
    OutOfRange {
        row: usize,
        column: usize,
        code: u32,
        cardinality: u32,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("table of {cells} cells exceeds the cap of {cap} cells")]
    Capacity { cells: u128, cap: usize },

    #[error("invalid structure: {0}")]
    Structure(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("optimizer did not converge after {iterations} iterations (gradient norm {gradient_norm:e})")]
    NonConvergence {
        iterations: usize,
        gradient_norm: f64,
    },

    #[error("model has no fitted parameters; run `cmnet fit` first")]
    Unfitted,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn structure(msg: impl Into<String>) -> Self {
        Error::Structure(msg.into())
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
