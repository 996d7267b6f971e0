use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke a documented precondition (shape mismatch, empty list, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// Input data was rejected (non-finite entries, out-of-range arguments, malformed records).
    #[error("invalid input: {0}")]
    Input(String),

    /// A numerical routine failed (non-convergence, divergence).
    #[error("numeric failure: {0}")]
    Numeric(String),

    /// The requested quantity is undefined for the given arguments.
    #[error("domain error: {0}")]
    Domain(String),

    /// A program could not be compiled into attention heads.
    #[error("compile error: {0}")]
    Compile(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}

pub(crate) fn input(msg: impl Into<String>) -> Error {
    Error::Input(msg.into())
}
