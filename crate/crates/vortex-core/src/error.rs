use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("singular evaluation: {0}")]
    Singular(String),
    #[error("outside the domain of validity: {0}")]
    Domain(String),
    #[error("quadrature error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    Quadrature { estimate: f64, tolerance: f64 },
    #[error("discretization check failed: {0}")]
    Discretization(String),
    #[error("integration failed: {0}")]
    Integration(String),
    #[error("linear solve failed: {0}")]
    Conditioning(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;
