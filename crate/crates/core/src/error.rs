use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScviError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("block structure mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("point is outside the entropy working interior (min coordinate {min}, sum {sum})")]
    OutsideInterior { min: f64, sum: f64 },

    #[error("invalid set: {0}")]
    InvalidSet(String),

    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("certificate failed: {0}")]
    CertificateFailed(String),

    #[error("operation not applicable: {0}")]
    NotApplicable(String),

    #[error("iterate diverged at k={iteration}: norm {norm} exceeds guard {guard}")]
    Diverged { iteration: usize, norm: f64, guard: f64 },

    #[error("iterative solve did not converge: residual {residual} after {iterations} iterations")]
    NoConvergence { residual: f64, iterations: usize },

    #[error("missing constant: {0}")]
    MissingConstant(&'static str),
}

pub type Result<T> = std::result::Result<T, ScviError>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> ScviError {
    ScviError::InvalidParameter {
        name,
        reason: reason.into(),
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(ScviError::DimensionMismatch { expected, got })
    }
}

pub(crate) fn check_finite(v: &[f64], what: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(ScviError::NonFinite(what))
    }
}
