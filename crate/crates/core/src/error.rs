use thiserror::Error;

/// Errors raised by field construction, samplers and estimators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid lattice: {0}")]
    InvalidLattice(String),

    #[error("invalid height band [{lo}, {hi}): {reason}")]
    InvalidBand { lo: f64, hi: f64, reason: &'static str },

    #[error("covariance row is not positive semidefinite: eigenvalue {value} at index {index} is below -{tolerance}")]
    NotPositiveSemidefinite { index: usize, value: f64, tolerance: f64 },

    #[error("transform of a symmetric row has imaginary part {0:e}")]
    ComplexSpectrum(f64),

    #[error("invalid cutpoints: {0}")]
    InvalidCutpoints(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dense covariance matrix is not positive definite")]
    CholeskyFailed,
}

pub type Result<T> = std::result::Result<T, Error>;
