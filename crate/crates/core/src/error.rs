use num_complex::Complex64;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("power iteration did not converge after {iterations} iterations (rayleigh quotient {value})")]
    NoConvergence {
        iterations: usize,
        vector: Vec<Complex64>,
        value: f64,
    },
    #[error("degenerate input: {0}")]
    Degenerate(&'static str),
    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e}")]
    NotPositiveSemidefinite { eigenvalue: f64 },
    #[error("matrix is not Hermitian (max asymmetry {asymmetry:e})")]
    NotHermitian { asymmetry: f64 },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("device {device} has a channel orthogonal to the receiver")]
    OrthogonalChannel { device: usize },
    #[error("empty device set: {0}")]
    EmptySet(&'static str),
}
