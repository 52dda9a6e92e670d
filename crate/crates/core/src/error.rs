use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    /// No bounded-type thin local set exists with these two boundary values:
    /// the gap `a + b` is below the threshold `2*lambda`.
    #[error("no two-valued set exists for a={a}, b={b}: requires a+b >= 2*lambda = {threshold}")]
    NoSuchBtls { a: f64, b: f64, threshold: f64 },

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn invalid_argument(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
