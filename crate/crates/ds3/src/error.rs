//! Error type shared across the crate.

use std::path::PathBuf;

/// Convenience alias used by every fallible operation in this crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Everything that can go wrong while building matrices, reading files, or
/// running the solver.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A matrix was declared with zero rows or zero columns.
    #[error("matrix dimensions must be at least 1x1")]
    EmptyMatrix,

    /// The flat data buffer does not match the declared shape.
    #[error("data length {got} does not match declared shape {rows}x{cols}")]
    ShapeMismatch { rows: usize, cols: usize, got: usize },

    /// A NaN or infinity was found where a finite value is required.
    #[error("non-finite value {value} at row {row}, column {col}")]
    NonFinite { row: usize, col: usize, value: f64 },

    /// Every target column must have at least one observed dissimilarity;
    /// otherwise that target cannot be represented at all.
    #[error("column {col} has no observed entry")]
    UnobservedColumn { col: usize },

    /// A caller-supplied parameter is out of its documented domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The operation only makes sense when the source and target sets are the
    /// same, i.e. the matrix is square.
    #[error("operation requires a square matrix, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    /// The identical-source/target lower threshold requires every element to
    /// be strictly closer to itself than any other element is to it.
    #[error(
        "self-representation assumption violated: d[{i}][{j}] = {dij} \
         is not greater than d[{j}][{j}] = {djj}"
    )]
    SelfDissimilarityViolated { i: usize, j: usize, dij: f64, djj: f64 },

    /// The supplied group index sets are not a valid joint partition
    /// specification (overlap, emptiness, out of range, uncovered targets).
    #[error("invalid partition specification: {0}")]
    InvalidPartition(String),

    /// The strict separation condition failed, so the group threshold is
    /// undefined.
    #[error("joint partition check failed with {violations} violation(s)")]
    PartitionCheckFailed { violations: usize },

    /// The solver produced a non-finite iterate.
    #[error("solver produced a non-finite iterate at iteration {iter}")]
    NumericFailure { iter: usize },

    /// Exhaustive enumeration was requested on an instance too large for it.
    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),

    /// Underlying I/O failure, annotated with the file path.
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A cell of a text matrix file failed to parse; `line` is 1-based.
    #[error("{path}:{line}: {detail}")]
    Parse {
        path: PathBuf,
        line: usize,
        detail: String,
    },

    /// A structural problem with a matrix file (bad magic, truncation, ...).
    #[error("{path}: {detail}")]
    Format { path: PathBuf, detail: String },
}
