use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid rank: requested {requested}, at most {max} available")]
    InvalidRank { requested: usize, max: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite entry at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("weight {index} = {value} lies outside the open interval (0, 1)")]
    Domain { index: usize, value: f64 },

    #[error("matrix is not positive definite (pivot {pivot})")]
    RankDeficient { pivot: usize },

    #[error("invalid sketch: {0}")]
    InvalidSketch(String),

    #[error("damped Newton solve failed after escalating damping to {damping:e}")]
    DampedSolveFailure { damping: f64 },

    #[error("line search failed after {halvings} backtracking steps")]
    LineSearchFailure { halvings: usize },

    #[error("{path}:{line}:{col}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        col: usize,
        msg: String,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
