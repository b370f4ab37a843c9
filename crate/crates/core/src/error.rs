use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An exhaustive computation would exceed the configured term budget.
    #[error("resource limit: {what} needs {requested} terms, budget is {budget}")]
    ResourceLimit {
        what: String,
        requested: f64,
        budget: u64,
    },

    #[error("numerical failure: {what} (residual {residual:e})")]
    NumericalFailure { what: String, residual: f64 },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    /// A parsed system failed validation; `factor` and `generator` are 1-based.
    #[error("validation error in factor {factor}, generator {generator}: {message}")]
    Validation {
        factor: usize,
        generator: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
