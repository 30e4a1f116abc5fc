use thiserror::Error;

/// Errors raised by the numerical library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Input failed a precondition (shape, sign, symmetry, physicality).
    #[error("validation error: {0}")]
    Validation(String),

    /// A numerical procedure did not reach its target accuracy.
    #[error("numerical error: {message}{}", achieved.map(|a| format!(" (achieved tolerance {a:.3e})")).unwrap_or_default())]
    Numerical {
        message: String,
        achieved: Option<f64>,
    },

    /// Requested time lies beyond the bath recurrence guard.
    #[error("time {requested} exceeds the validity horizon {horizon} (half the bath recurrence time); increase the number of bath modes or override the horizon")]
    Horizon { requested: f64, horizon: f64 },

    /// Parameters lead to an unstable or meaningless model.
    #[error("parameter regime error: {0}")]
    ParameterRegime(String),

    /// Operation not available for the requested model variant.
    #[error("unsupported operation: {0}")]
    Unsupported(String),
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    pub(crate) fn numerical(msg: impl Into<String>, achieved: Option<f64>) -> Self {
        Error::Numerical {
            message: msg.into(),
            achieved,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
