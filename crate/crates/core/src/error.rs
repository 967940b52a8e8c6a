use thiserror::Error;

/// Errors produced by the estimators and their supporting primitives.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ShapeError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("log-likelihood is not finite for this measure: {0:?}")]
    UnboundedLikelihood(crate::grenander::LikelihoodRegime),

    #[error("did not converge after {iterations} iterations (best objective {objective})")]
    NonConvergence {
        iterations: usize,
        objective: f64,
        best: Vec<f64>,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, ShapeError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(ShapeError::InvalidArgument(msg.into()))
}
