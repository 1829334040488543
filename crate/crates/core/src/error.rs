use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid operator specification: {0}")]
    InvalidSpec(String),

    #[error("requested {requested} modes but a grid of {grid_points} points resolves at most {max}")]
    TooManyModes {
        requested: usize,
        grid_points: usize,
        max: usize,
    },

    #[error("eigensolver failed to converge: {0}")]
    NoConvergence(String),

    #[error("interaction kernel must be nonnegative: {0}")]
    NegativeKernel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("dimension {dim} exceeds the budget of {budget}")]
    DimensionOverflow { dim: usize, budget: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("operator is not Hermitian (deviation {0:e})")]
    NotHermitian(f64),

    #[error("ensemble has not been reweighted by the interaction")]
    NotReweighted,

    #[error("{offending} of {total} samples exceed the cutoff tail threshold {threshold:e}")]
    CutoffViolation {
        offending: usize,
        total: usize,
        threshold: f64,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
