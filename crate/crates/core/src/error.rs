use thiserror::Error;

/// Errors raised anywhere in the library.
///
/// Variants are grouped so that a front end can map them onto distinct exit
/// codes: invalid input, resource budget, and numerical failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    Invalid(String),

    #[error("state of {required} amplitudes exceeds the budget of {budget} ({bytes} bytes required)")]
    Budget {
        required: u128,
        budget: u64,
        bytes: u128,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("lanczos did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("format: {0}")]
    Format(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::Invalid(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }

    /// Short machine-readable tag for the error class.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Invalid(_) | Error::Format(_) => "validation",
            Error::Budget { .. } => "budget",
            Error::Numerical(_) | Error::NotConverged { .. } => "numerical",
            Error::Io(_) => "io",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
