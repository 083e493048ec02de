use thiserror::Error;

/// Every failure mode of the engine.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("evaluation error at multi-index {index:?}: {message}")]
    Evaluation { index: Vec<usize>, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("parse error at byte {offset}: {message}")]
    Parse { offset: usize, message: String },

    #[error("regularity error: {0}")]
    Regularity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate flag: transverse vector is parallel to the flagpole")]
    DegenerateFlag,

    #[error("integration left the regular domain after t = {t_last}: {message}")]
    Integration { t_last: f64, message: String },

    #[error("arithmetic error: {0}")]
    Arithmetic(String),
}

impl Error {
    pub(crate) fn eval(message: impl Into<String>) -> Self {
        Error::Evaluation {
            index: Vec::new(),
            message: message.into(),
        }
    }

    /// Evaluation failures inside a metric computation mean the point is not
    /// in the metric's regular domain.
    pub(crate) fn into_regularity(self) -> Self {
        match self {
            Error::Evaluation { message, .. } => Error::Regularity(message),
            other => other,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
