use thiserror::Error;

use crate::mc_engine::KilledPathSummary;

#[derive(Debug, Error)]
pub enum Error {
    #[error("argument out of domain: {0}")]
    Domain(String),

    #[error("quadrature did not converge: estimate {estimate}, error estimate {error_estimate}")]
    Quadrature { estimate: f64, error_estimate: f64 },

    #[error("laplace inversion failed: {0}")]
    Inversion(String),

    #[error("process is recurrent for these parameters: {0}")]
    Recurrent(String),

    #[error("operation not supported for variant {0}")]
    UnsupportedVariant(String),

    #[error("operation not supported for domain {0}")]
    UnsupportedDomain(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("sampling failed: {0}")]
    Sampling(String),

    #[error("bound degenerates: {0}")]
    DegenerateBound(String),

    #[error("coincident points")]
    Singularity,

    #[error("points too close for the smoothing bandwidth: {0}")]
    Bias(String),

    #[error("path exceeded {steps} steps")]
    Truncated {
        steps: u64,
        partial: Box<KilledPathSummary>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("statistics: {0}")]
    Statistics(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
