//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated a domain precondition (non-unit residue, bad rank, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A nested sum would exceed the configured term budget.
    #[error("term budget exceeded: needs {needed} terms, budget is {budget}")]
    Budget { needed: u64, budget: u64 },

    /// A quadrature or contour integral failed to reach the requested accuracy.
    #[error("precision error: {0}")]
    Precision(String),

    /// A coefficient provider cannot supply the requested value.
    #[error("unsupported argument: {0}")]
    Unsupported(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
    pub fn precision(msg: impl Into<String>) -> Self {
        Error::Precision(msg.into())
    }
    pub fn unsupported(msg: impl Into<String>) -> Self {
        Error::Unsupported(msg.into())
    }
}
