use thiserror::Error;

/// Errors raised across the laboratory.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("dense cap exceeded: {requested} amplitudes requested, cap is {cap}")]
    DenseCap { requested: u128, cap: usize },
    #[error("not primitive: {0}")]
    NotPrimitive(String),
    #[error("gauge fix undefined at zero momentum")]
    ZeroMomentum,
    #[error("momentum {p} is not quantized for n = {n}")]
    Unquantized { p: f64, n: usize },
    #[error("non-orthonormal basis: {0}")]
    NonOrthonormal(String),
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("serialization: {0}")]
    Format(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
