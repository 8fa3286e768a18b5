use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("singular matrix (det = {0:e})")]
    Singular(f64),
    #[error("zero vector")]
    ZeroVector,
    #[error("degenerate basis (Gram determinant {0:e})")]
    DegenerateBasis(f64),
    #[error("degenerate frame at index {index}: {reason}")]
    DegenerateFrame { index: i64, reason: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("series diverged: partial sum {0:e} exceeds the cap")]
    Divergence(f64),
    #[error("no convergence: {0}")]
    NoConvergence(String),
    #[error("scenario construction failed: {0}")]
    Scenario(String),
}

pub type Result<T> = std::result::Result<T, Error>;
