use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by metric computations and data validation.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("too few elements: {what} needs at least {needed}, got {got}")]
    TooFew {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("dimension mismatch: {0} vs {1}")]
    DimensionMismatch(usize, usize),

    #[error("row count mismatch for `{source_id}`: expected {expected}, got {got}")]
    RowMismatch {
        source_id: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("representation `{0}` is not available for `{1}`")]
    MissingRepresentation(String, String),

    #[error("property column `{0}`: {1}")]
    Column(String, String),

    #[error("{0}")]
    Model(String),

    #[error("{0}")]
    Load(String),

    #[error("{0}")]
    Config(String),
}

/// Errors raised while reading or writing files.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected \"SQME\"")]
    BadMagic,

    #[error("unsupported version {0}")]
    UnsupportedVersion(u8),

    #[error("unsupported element type {0}")]
    UnsupportedElementType(u8),

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("line {line}: {message}")]
    Line { line: usize, message: String },

    #[error("line {line}, column {column}: {message}")]
    Cell {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{0}")]
    Invalid(String),
}

impl FormatError {
    pub(crate) fn line(line: usize, message: impl Into<String>) -> Self {
        FormatError::Line {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn cell(line: usize, column: usize, message: impl Into<String>) -> Self {
        FormatError::Cell {
            line,
            column,
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
