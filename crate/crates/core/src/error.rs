use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unsupported objective dimension {0}: exact hypervolume covers d = 2 and d = 3, use the Monte-Carlo estimator instead")]
    UnsupportedDimension(usize),

    #[error("point {point:?} lies outside the box {lo:?}..{hi:?}")]
    OutOfBox {
        point: Vec<f64>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },

    #[error("evaluator returned a non-finite value for candidate {index}: {values:?}")]
    NonFinite { index: usize, values: Vec<f64> },

    #[error("evaluator failure: {0}")]
    Evaluator(String),

    #[error("kernel matrix factorization failed for objective {objective} even with jitter {jitter:e}")]
    Factorization { objective: usize, jitter: f64 },

    #[error("model is not fitted")]
    NotFitted,

    #[error("truncation box too small: acceptance probability {0:e} is below 1e-3")]
    TruncationTooSmall(f64),

    #[error("unknown problem `{name}`; available problems: {available}")]
    UnknownProblem { name: String, available: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("missing artifact {0}")]
    MissingArtifact(PathBuf),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
