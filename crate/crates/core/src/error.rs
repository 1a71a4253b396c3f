//! Crate-wide error type.

use thiserror::Error;

/// Everything that can go wrong across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("zero vector where a nonzero vector is required")]
    ZeroVector,

    #[error("zero variance: all observations are identical")]
    ZeroVariance,

    #[error("need at least {needed} observations, got {got}")]
    TooFewObservations { needed: usize, got: usize },

    #[error("negative component {value:e} at index {index}")]
    NegativeComponent { index: usize, value: f64 },

    #[error("expected return p'w must be positive, got {0:e}")]
    NonPositiveExpectedReturn(f64),

    #[error("enumeration budget exceeded: C({n},{m}) = {count} supports > {budget}")]
    EnumerationBudget {
        n: usize,
        m: usize,
        count: u128,
        budget: u128,
    },

    #[error("non-finite iterate at iteration {iteration}")]
    NonFiniteIterate { iteration: usize },

    #[error("ruin: portfolio return {value} <= -1 at period {index}")]
    Ruin { index: usize, value: f64 },

    #[error("non-positive wealth factor {value:e} at period {index}")]
    NonPositiveWealthFactor { index: usize, value: f64 },

    #[error("parse error at row {row}, column {col} of {path}: {message}")]
    Parse {
        path: String,
        row: usize,
        col: String,
        message: String,
    },

    #[error("missing-data sentinel {value} at row {row}, column {col} of {path}")]
    MissingData {
        path: String,
        row: usize,
        col: String,
        value: f64,
    },

    #[error("risk-free series misaligned: {0}")]
    Alignment(String),

    #[error("unsupported schema version {0} (expected {expected})", expected = crate::data_io::SCHEMA_VERSION)]
    SchemaVersion(u32),

    #[error("I/O error on {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("JSON error on {path}")]
    Json {
        path: String,
        #[source]
        source: serde_json::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
