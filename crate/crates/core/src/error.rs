use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("point {index} at ({row}, {col}) lies outside a {height}x{width} map")]
    OutOfBounds {
        index: usize,
        row: usize,
        col: usize,
        height: usize,
        width: usize,
    },

    #[error("duplicate point at ({row}, {col})")]
    DuplicatePoint { row: usize, col: usize },

    #[error("point set is empty")]
    EmptyPointSet,

    #[error("sensor field of view contains no valid ground-truth depth")]
    EmptyFov,

    #[error("need at least {needed} points to fit, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("affine fit is rank deficient: all {count} samples share x = {value}")]
    RankDeficient { count: usize, value: f64 },

    #[error("evaluation set is empty")]
    EmptyEvaluation,

    #[error("non-positive {which} depth {value} at pixel ({row}, {col})")]
    NonPositiveDepth {
        which: &'static str,
        value: f64,
        row: usize,
        col: usize,
    },

    #[error("malformed header: {0}")]
    MalformedHeader(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("corrupt payload: {0}")]
    CorruptPayload(String),

    #[error("unsupported channel count {0}; expected a single channel")]
    UnsupportedChannels(usize),

    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_path(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
