use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("Hilbert-space dimension {dimension} exceeds the configured cap {cap}")]
    DimensionOverflow { dimension: u128, cap: usize },

    #[error("malformed operator index {modes:?}: {reason}")]
    MalformedIndex { modes: Vec<usize>, reason: String },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("resolvent is numerically singular at E = {energy}")]
    SingularResolvent { energy: f64 },

    #[error("eigenvector matrix is near-defective (condition number {condition:.3e})")]
    NearDefective { condition: f64 },

    #[error("residue sum is ill-conditioned: {reason}")]
    IllConditionedResidue { reason: String },

    #[error("quadrature did not converge after {panels} panels (estimate {estimate}, error {error})")]
    QuadratureNotConverged {
        estimate: f64,
        error: f64,
        panels: usize,
    },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("realization {index} failed: {source}")]
    Realization {
        index: u64,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
