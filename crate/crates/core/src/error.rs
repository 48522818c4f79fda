use std::fmt;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    DimensionMismatch {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("index ({row}, {col}) out of range for a {rows}x{cols} matrix")]
    IndexOutOfRange {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("simplex dimension {k} out of range (valid: {min}..={max})")]
    DimensionOutOfRange { k: usize, min: usize, max: usize },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("shape error: {0}")]
    Shape(String),

    #[error("incomplete eigensystem: {have} of {need} eigenpairs")]
    IncompleteEigensystem { have: usize, need: usize },

    #[error("operator of size {size} exceeds dense eigensolver cap {cap}")]
    TooLargeForDense { size: usize, cap: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {message}")]
    Schema { path: String, message: String },

    #[error("non-finite value at {0}")]
    NonFinite(String),

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(msg: impl fmt::Display) -> Self {
        Error::Shape(msg.to_string())
    }

    /// Wraps the error with a location such as `block 1, layer 0`.
    pub fn at(self, context: impl fmt::Display) -> Self {
        Error::Context {
            context: context.to_string(),
            source: Box::new(self),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
