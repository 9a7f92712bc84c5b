use thiserror::Error;

/// Errors raised by learners, losses and geometric primitives.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum OcoError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("non-finite input: {0}")]
    NonFinite(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("bound violated: {0}")]
    BoundViolated(String),

    #[error("solver did not converge: {0}")]
    Convergence(String),

    #[error("empty input: {0}")]
    Empty(String),
}

pub type Result<T> = std::result::Result<T, OcoError>;

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected != got {
        return Err(OcoError::DimensionMismatch { expected, got });
    }
    Ok(())
}

pub(crate) fn check_finite(what: &str, v: &[f64]) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(OcoError::NonFinite(what.to_string()))
    }
}

pub(crate) fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(OcoError::InvalidParameter(format!("{what} must be positive and finite, got {v}")))
    }
}
