use thiserror::Error;

/// Errors surfaced by the laboratory.
#[derive(Debug, Error)]
pub enum CdError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("linear solver failed: {0}")]
    Solver(String),
    #[error("frequency outside aperture: {0}")]
    OutsideAperture(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("serialization: {0}")]
    Serde(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, CdError>;
