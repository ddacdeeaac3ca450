use thiserror::Error;

/// Errors raised while validating inputs or running the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid region of interest: {0}")]
    InvalidRoi(String),

    #[error("invalid lidar model: {0}")]
    InvalidModel(String),

    #[error("invalid pose bounds: {0}")]
    InvalidBounds(String),

    #[error("invalid optimizer parameters: {0}")]
    InvalidParams(String),

    #[error("invalid cost {0}: must be finite and non-negative")]
    InvalidCost(f64),

    #[error("configuration mismatch: {0}")]
    Mismatch(String),

    #[error("invalid object spec: {0}")]
    InvalidObject(String),
}

pub type Result<T> = std::result::Result<T, Error>;
