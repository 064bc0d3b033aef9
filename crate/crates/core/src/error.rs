use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// An argument lies outside the domain of the function.
    #[error("domain error in {op}: {msg}")]
    Domain { op: &'static str, msg: String },

    #[error("size mismatch: expected {expected}, got {actual}")]
    SizeMismatch { expected: usize, actual: usize },

    #[error("state index {index} out of range for alphabet of size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("probabilities sum to {sum}, expected 1 within {tol:e}")]
    NotNormalized { sum: f64, tol: f64 },

    #[error("invalid {field}: {msg}")]
    Invalid { field: &'static str, msg: String },

    /// Projection onto a region of prior mass exactly 0 or 1 was requested.
    #[error("region {region} has degenerate prior mass {mass}")]
    DegenerateRegion { region: usize, mass: f64 },

    #[error("matrix is not positive definite")]
    NotPositiveDefinite,

    #[error("solver did not converge after {iterations} iterations (best value {best})")]
    ConvergenceFailure { iterations: usize, best: f64 },
}

impl Error {
    pub(crate) fn domain(op: &'static str, msg: impl Into<String>) -> Self {
        Error::Domain {
            op,
            msg: msg.into(),
        }
    }

    pub(crate) fn invalid(field: &'static str, msg: impl Into<String>) -> Self {
        Error::Invalid {
            field,
            msg: msg.into(),
        }
    }
}
