use thiserror::Error;

/// Errors raised by the library. Classification outcomes (for example a
/// matrix that is not a potential) are reported in result structs, not here.
#[derive(Debug, Error)]
pub enum GreenError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("point outside the domain: {0}")]
    OutsideDomain(String),

    #[error("quadrature did not converge: {0}")]
    Quadrature(String),

    #[error("linear solve failed: {0}")]
    Singular(String),

    #[error("step budget of {0} exceeded")]
    StepBudget(u64),

    #[error("resource limit: {0}")]
    Resource(String),

    #[error("empty lattice set: {0}")]
    EmptySet(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, GreenError>;
