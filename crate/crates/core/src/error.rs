use thiserror::Error;

/// Errors raised by the optimizer library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// Malformed arguments: wrong dimensions, empty data, out-of-range indices.
    #[error("invalid input: {0}")]
    Input(String),

    /// A value became NaN or infinite.
    #[error("numeric failure in {what}{}", component.map(|i| format!(" (component {i})")).unwrap_or_default())]
    NumericFailure {
        what: String,
        component: Option<usize>,
    },

    /// Inconsistent or unsupported configuration.
    #[error("configuration error: {0}")]
    Config(String),

    /// An internal precondition between cooperating objects was broken.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    /// The convergence bound is not defined for the given constants.
    #[error("bound invalid: {0}")]
    BoundInvalid(String),

    /// Strict-mode assertion failure inside a driver loop.
    #[error("inequality violated at (k={k}, s={s}): {detail}")]
    LemmaViolation { k: usize, s: usize, detail: String },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn numeric(what: impl Into<String>, component: Option<usize>) -> Self {
        Error::NumericFailure {
            what: what.into(),
            component,
        }
    }
}
