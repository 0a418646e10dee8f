use thiserror::Error;

/// Errors raised by the library. Each variant maps onto one CLI exit code
/// (see [`Error::exit_code`]).
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed call: wrong dimension, value outside the accepted range.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// A model file or subset key could not be parsed.
    #[error("parse error: {0}")]
    Parse(String),

    /// Mathematical domain violation (zero coefficient at a corner, r12 = 1 with a
    /// divergent series, boundary point of an open domain, ...).
    #[error("domain error: {0}")]
    Domain(String),

    /// A model hypothesis does not hold (p_i <= 0, p_[n] <= 0, ...).
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The distribution does not exist for these parameters (c <= 0 for n = 2).
    #[error("distribution does not exist: {0}")]
    Existence(String),

    /// The model fails the divisibility gate or the copula kernel check.
    #[error("invalid model: {0}")]
    Model(String),

    /// A series or quadrature hit its budget before meeting the tolerance.
    #[error("no convergence after {terms} terms: {what} (partial = {partial:e}, est. error = {est_error:e})")]
    Convergence { what: String, partial: f64, est_error: f64, terms: usize },

    /// A numeric routine (root finder, self-check) failed.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Exit-code taxonomy of the command line tool: 1 usage, 2 parse,
    /// 3 domain/precondition, 4 convergence, 5 validation failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Argument(_) => 1,
            Error::Parse(_) | Error::Io(_) => 2,
            Error::Domain(_) | Error::Precondition(_) | Error::Existence(_) | Error::Model(_) | Error::Numeric(_) => 3,
            Error::Convergence { .. } => 4,
        }
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::Argument(msg.into())
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
