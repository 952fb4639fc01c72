use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, GhostError>;

#[derive(Debug, Error)]
pub enum GhostError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("missing data file for {project} version {version}: {path}")]
    MissingVersion {
        project: String,
        version: String,
        path: PathBuf,
    },

    #[error("schema error: {0}")]
    Schema(String),

    #[error("parse error at data row {row}, column '{column}': {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("dataset contains a single class")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("training diverged at epoch {epoch} (non-finite loss)")]
    Diverged { epoch: usize },

    #[error("every tuning trial failed")]
    AllTrialsFailed,

    #[error("unknown key '{key}' in {source_name}; available: {available}")]
    UnknownKey {
        source_name: String,
        key: String,
        available: String,
    },

    #[error("registry error: {0}")]
    Registry(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl GhostError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        GhostError::Io {
            path: path.into(),
            source,
        }
    }
}
