//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed row {row}: {reason}")]
    MalformedRow { row: usize, reason: String },

    #[error("degenerate design: {0}")]
    DegenerateDesign(String),

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("design matrix is rank deficient on the positively weighted rows")]
    SingularDesign,

    #[error("estimating equation failed to converge after {iterations} iterations (score norm {score_norm:e})")]
    NoConvergence { iterations: usize, score_norm: f64 },

    #[error("separation detected: the logistic estimating equation has no finite solution")]
    Separation,

    #[error("numerical domain violation: {0}")]
    NumericalDomain(String),

    #[error("effect scale {scale} is undefined at mean {value}")]
    ScaleDomain { scale: &'static str, value: f64 },

    #[error("no internal control rows (z=1, a=0)")]
    NoInternalControls,

    #[error("no treated rows (z=1, a=1)")]
    NoTreated,

    #[error("no control rows with positive weight")]
    NoControls,

    #[error("no external rows (z=0)")]
    NoExternalRows,

    #[error("bread matrix of the stacked estimating equations is singular")]
    SingularBread,

    #[error("estimator failed on {failures} bootstrap resamples (retry cap {retry_cap} exceeded)")]
    EstimatorFailure { failures: usize, retry_cap: usize },

    #[error("too many replication failures in cell {cell}: {failures} of {reps}")]
    TooManyFailures {
        cell: String,
        failures: usize,
        reps: usize,
    },

    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
