use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violates a mathematical precondition.
    #[error("domain error: {0}")]
    Domain(String),

    /// A numerical routine failed to reach its tolerance or overflowed.
    #[error("numeric error: {message}")]
    Numeric {
        message: String,
        /// Best estimate at the time of failure, if any.
        estimate: Option<f64>,
        /// Error estimate or offending value, if any.
        diagnostic: Option<f64>,
    },

    /// The experiment specification is malformed.
    #[error("spec error: {0}")]
    Spec(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn numeric(msg: impl Into<String>) -> Self {
        Error::Numeric {
            message: msg.into(),
            estimate: None,
            diagnostic: None,
        }
    }

    pub fn numeric_with(msg: impl Into<String>, estimate: f64, diagnostic: f64) -> Self {
        Error::Numeric {
            message: msg.into(),
            estimate: Some(estimate),
            diagnostic: Some(diagnostic),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
