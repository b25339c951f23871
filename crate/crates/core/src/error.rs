use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv parse error: {0}")]
    Csv(#[from] csv::Error),
    #[error("row {row}: expected {expected} cells, found {found}")]
    RowWidth {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("row {row}, column '{column}': missing or non-finite value")]
    MissingCell { row: usize, column: String },
    #[error("empty input: {0}")]
    Empty(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("schema: {0}")]
    Schema(String),
    #[error("label column '{0}' not found")]
    LabelColumn(String),
    #[error("degenerate sample: fewer than two distinct values")]
    Degenerate,
    #[error("evaluation needs both classes (positives={positives}, negatives={negatives})")]
    SingleClass { positives: usize, negatives: usize },
    #[error("length mismatch: {0} scores vs {1} labels")]
    LengthMismatch(usize, usize),
    #[error("attribute {attribute}: expected {expected} value")]
    KindMismatch {
        attribute: String,
        expected: &'static str,
    },
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("model file: {0}")]
    ModelFormat(String),
    #[error("model format version {found} is not supported (expected {expected})")]
    ModelVersion { found: u32, expected: u32 },
    #[error("benchmark generation: {0}")]
    Generation(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
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
