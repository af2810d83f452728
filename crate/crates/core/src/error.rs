use thiserror::Error;

/// Errors raised by the numerical core.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid domain: {0}")]
    InvalidDomain(String),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("duplicate parameter node {0}")]
    DuplicateNode(f64),

    #[error("index {index} out of range (len {len})")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("parameter {mu} coincides with transport node {node}")]
    NodeCollision { mu: f64, node: f64 },

    #[error("singular Newton derivative matrix (condition estimate {condition:e})")]
    SingularBasis { condition: f64 },

    #[error("invalid settings: {0}")]
    InvalidSettings(String),

    #[error("unsupported operation: {0}")]
    Unsupported(String),

    #[error("numerical failure in {stage}: {detail}")]
    Numerical { stage: &'static str, detail: String },

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
