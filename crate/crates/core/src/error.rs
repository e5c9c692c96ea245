use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid path: {0}")]
    InvalidPath(String),
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolveError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("flow is not integral in multiples of the common supply: {0}")]
    NotIntegral(String),
    #[error("no convergence: {0}")]
    Nonconvergence(String),
    #[error("instance too large: {0}")]
    TooLarge(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("internal inconsistency: {0}")]
    Internal(String),
}
