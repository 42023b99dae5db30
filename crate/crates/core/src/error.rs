use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("I/O error on {}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("label column must hold exactly two distinct values, found {0:?}")]
    NonBinaryLabel(Vec<String>),
    #[error("unknown category {value:?} in column {column:?}")]
    UnknownCategory { column: String, value: String },
    #[error("numeric column {0:?} has no parseable values")]
    NoNumericValues(String),
    #[error("invalid dimension: expected {expected}, got {got}")]
    InvalidDimension { expected: usize, got: usize },
    #[error("degenerate split: train has {train} rows, test has {test} rows")]
    DegenerateSplit { train: usize, test: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error("min_leaf {min_leaf} exceeds the {n} available training rows")]
    MinLeafExceedsData { min_leaf: usize, n: usize },
    #[error("dimension mismatch: tree expects {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("evaluation set is empty")]
    EmptyEvalSet,
    #[error("invalid probability {0}")]
    InvalidProbability(f64),
    #[error("leaf size must be at least 1")]
    ZeroLeafSize,
    #[error("at least 2 replications are required, got {0}")]
    InsufficientReplications(usize),
    #[error("at least 2 realizations are required, got {0}")]
    InsufficientRealizations(usize),
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("training data contains a single label class")]
    SingleClassData,
    #[error("regret scores are empty")]
    EmptyScores,
    #[error("coverage grid is empty")]
    EmptyGrid,
    #[error("invalid coverage grid: {0}")]
    InvalidGrid(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
