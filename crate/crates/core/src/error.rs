use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input violates a documented precondition or structural invariant.
    #[error("validation failed: {0}")]
    Validation(String),

    #[error("block index {m} out of range for local dimension {d}")]
    BlockRange { m: usize, d: usize },

    #[error("unsupported parity: {family} requires {expected} dimension, got {d}")]
    Parity {
        family: &'static str,
        expected: &'static str,
        d: usize,
    },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// A computation would exceed the configured Hilbert-space cap.
    #[error("dimension {dim} exceeds the configured cap {cap}")]
    Size { dim: usize, cap: usize },

    #[error("mismatched question or answer sets: {0}")]
    SetMismatch(String),

    #[error("operator is not supported on the given projector (off-support norm {0:.3e})")]
    Support(f64),

    #[error("operator is not Hermitian (deviation {0:.3e})")]
    NotHermitian(f64),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("parse: {0}")]
    Parse(String),
}

impl Error {
    /// True for errors caused by resource limits rather than bad input.
    pub fn is_resource(&self) -> bool {
        matches!(self, Error::Size { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
