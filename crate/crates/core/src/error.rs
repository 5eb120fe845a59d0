use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("header mismatch at column {column}: expected `{expected}`, found `{found}`")]
    HeaderMismatch {
        column: usize,
        expected: String,
        found: String,
    },

    #[error("row {row}, column `{column}`: {message}")]
    Cell {
        row: usize,
        column: String,
        message: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("feature `{0}` cannot be imputed: every value is missing")]
    AllMissing(String),

    #[error("feature `{feature}` has level `{level}` not seen during fitting")]
    UnseenLevel { feature: String, level: String },

    #[error("dataset has no labels")]
    Unlabeled,

    #[error("labels contain a single class")]
    SingleClass,

    #[error("dataset is not fully numeric: {0}")]
    NotNumeric(String),

    #[error("unknown feature `{0}`")]
    UnknownFeature(String),

    #[error("operation requires a tree-based model, got `{0}`")]
    NotTreeModel(String),

    #[error("too many features for exhaustive enumeration: {0} > 12")]
    TooManyFeatures(usize),

    #[error("{0}")]
    Degenerate(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
