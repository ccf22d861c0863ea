use thiserror::Error;

/// Everything that can go wrong while building or analysing a controller.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch in `{field}`: expected {expected}, found {found}")]
    DimensionMismatch {
        field: String,
        expected: String,
        found: String,
    },

    #[error("`{field}` is not symmetric (relative defect {defect:.3e})")]
    NotSymmetric { field: String, defect: f64 },

    #[error("{what} is not positive definite (lambda_min = {lambda_min:.12e})")]
    NotPositiveDefinite { what: String, lambda_min: f64 },

    #[error("{what} is not stable (spectral radius = {spectral_radius:.12e})")]
    Unstable { what: String, spectral_radius: f64 },

    #[error("pre-stabilizing gain does not stabilize (spectral radius of A + B K0 = {spectral_radius:.12e})")]
    NotStabilizing { spectral_radius: f64 },

    #[error("no convergence after {iterations} iterations (last step {last_step:.3e})")]
    NoConvergence { iterations: usize, last_step: f64 },

    #[error("R + B^T P B is not positive definite")]
    SingularInnerSolve,

    #[error("Sylvester equation has no unique solution (min |lambda_i mu_j - 1| = {gap:.3e})")]
    SingularPencil { gap: f64 },

    #[error("{what} is singular")]
    Singular { what: String },

    #[error("invalid horizon {h}: {reason}")]
    InvalidHorizon { h: usize, reason: String },

    #[error("state diverged at step {step}")]
    NonFinite { step: usize },

    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub(crate) fn mismatch(field: &str, expected: (usize, usize), found: (usize, usize)) -> Error {
    Error::DimensionMismatch {
        field: field.to_string(),
        expected: format!("{}x{}", expected.0, expected.1),
        found: format!("{}x{}", found.0, found.1),
    }
}
