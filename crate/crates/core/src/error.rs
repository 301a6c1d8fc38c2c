//! Error type shared across the crate.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{op}: dimension mismatch, left is {left_rows}x{left_cols}, right is {right_rows}x{right_cols}")]
    ShapeMismatch {
        op: &'static str,
        left_rows: usize,
        left_cols: usize,
        right_rows: usize,
        right_cols: usize,
    },

    #[error("division by zero with nonzero numerator at entry ({row}, {col})")]
    DivisionByZero { row: usize, col: usize },

    #[error("zero base raised to negative power {exponent} at entry ({row}, {col})")]
    ZeroToNegativePower {
        row: usize,
        col: usize,
        exponent: f64,
    },

    #[error("negative value {value} at entry ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("non-finite value {value} at entry ({row}, {col})")]
    NonFiniteEntry { row: usize, col: usize, value: f64 },

    #[error("duplicate sparse entry at ({row}, {col})")]
    DuplicateSparseEntry { row: usize, col: usize },

    #[error("sparse entry ({row}, {col}) out of bounds for a {rows}x{cols} matrix")]
    SparseEntryOutOfBounds {
        row: usize,
        col: usize,
        rows: usize,
        cols: usize,
    },

    #[error("beta-divergence domain violation in the {branch} branch: x = {x}, y = {y}")]
    BetaDomain { branch: &'static str, x: f64, y: f64 },

    #[error("at entry ({row}, {col}): {source}")]
    AtEntry {
        row: usize,
        col: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("column {index} of {factor} is identically zero: {reason}")]
    DegenerateColumn {
        index: usize,
        factor: &'static str,
        reason: &'static str,
    },

    #[error("multiplier search failed for column {column}: {reason}")]
    MultiplierSolve { column: usize, reason: String },

    #[error("unsupported configuration: {reason}")]
    UnsupportedConfig { reason: String },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Attach a matrix entry location to an error bubbling out of an
    /// elementwise computation.
    pub fn at_entry(self, row: usize, col: usize) -> Error {
        Error::AtEntry {
            row,
            col,
            source: Box::new(self),
        }
    }
}
