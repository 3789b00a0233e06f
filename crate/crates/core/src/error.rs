use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum HofaError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("{what} needs {needed} steps, cap is {cap}")]
    CapExceeded { what: String, needed: u128, cap: u128 },
    #[error("malformed input: {0}")]
    Malformed(String),
    #[error("search exhausted: {0}")]
    SearchExhausted(String),
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl HofaError {
    /// True for errors caused by hitting an enumeration or retry budget.
    pub fn is_cap(&self) -> bool {
        matches!(self, HofaError::CapExceeded { .. } | HofaError::SearchExhausted(_))
    }
}

pub type Result<T> = std::result::Result<T, HofaError>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(HofaError::InvalidParameter(msg.into()))
}

pub(crate) fn shape<T>(msg: impl Into<String>) -> Result<T> {
    Err(HofaError::Shape(msg.into()))
}
