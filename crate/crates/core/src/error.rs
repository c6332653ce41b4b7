use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at row {row}, column `{column}`: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    #[error("empty input: {0}")]
    Empty(String),

    #[error("header mismatch: {0}")]
    HeaderMismatch(String),

    #[error("missing value at row {row}, column `{column}`")]
    MissingValue { row: usize, column: String },

    #[error("value {value} at row {row}, column `{column}` lies outside the support {support}")]
    OutOfSupport {
        row: usize,
        column: String,
        value: f64,
        support: String,
    },

    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),

    #[error("invalid schema: {0}")]
    InvalidSchema(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("kernel bandwidth must be strictly positive (got {0})")]
    ZeroBandwidth(f64),

    #[error("degenerate target: no output exceeds the threshold")]
    DegenerateTarget,

    #[error("gamma approximation unavailable: {0}")]
    GammaApproximation(String),

    #[error("covariance matrix is not positive definite; increase the nugget floor")]
    IndefiniteCovariance,

    #[error("gaussian-process fit failed: {0}")]
    FitFailure(String),

    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("Q2 is undefined for a constant observed vector")]
    ConstantObserved,

    #[error("non-finite prediction: {0}")]
    NonFinite(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
