use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid algebra: {0}")]
    InvalidAlgebra(String),
    #[error("operands live on different algebras")]
    AlgebraMismatch,
    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),
    #[error("operator is not positive: {0}")]
    NotPositive(String),
    #[error("malformed operator: {0}")]
    Malformed(String),
    #[error("argument out of domain: {0}")]
    Domain(String),
    #[error("algebra is not a declared tensor product")]
    NotTensorProduct,
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("dimension budget exceeded: {0}")]
    Budget(String),
    #[error("solver failure: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, Error>;
