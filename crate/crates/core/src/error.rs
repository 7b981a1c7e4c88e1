use std::io;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Length { expected: u64, found: u64 },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("row {row} is not a probability distribution: {reason}")]
    Normalization { row: usize, reason: String },

    #[error("alignment error: {what}: corpus has {expected} tokens, found {found} rows")]
    Alignment {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("insufficient sample: need at least {needed} rows, found {found}")]
    InsufficientSample { needed: usize, found: usize },

    #[error("degenerate sample: covariance is identically zero")]
    DegenerateSample,

    #[error("datastore is empty")]
    EmptyStore,

    #[error("datastore has no inverted-file index")]
    MissingIndex,

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("zero vector: {0}")]
    ZeroVector(String),

    #[error("unseen token {0:?} and smoothing is disabled")]
    UnseenToken(String),

    #[error("empty input: {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}
