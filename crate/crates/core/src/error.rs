use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error(
        "operator is not hermitian (max |H - H^dag| = {deviation:e}, tolerance {tolerance:e})"
    )]
    NotHermitian { deviation: f64, tolerance: f64 },

    #[error("truncation N = {fock_dim} too small: tail weight {tail:e}; need N >= {required}")]
    TruncationInsufficient {
        fock_dim: usize,
        tail: f64,
        required: usize,
    },

    #[error("leakage {leakage:e} beyond truncation exceeds threshold {threshold:e}")]
    Leakage { leakage: f64, threshold: f64 },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("measurement outcome {outcome} has probability {probability:e}; post-selected state is null")]
    NullOutcome { outcome: String, probability: f64 },

    #[error("state is not normalized: norm^2 = {0}")]
    NotNormalized(f64),
}

pub type Result<T> = std::result::Result<T, Error>;
