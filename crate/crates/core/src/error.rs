use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("not a density: {reason} (worst value {value:.3e} at ({x:.4}, {y:.4}))")]
    NotADensity {
        reason: String,
        x: f64,
        y: f64,
        value: f64,
    },

    #[error("not a copula: {0}")]
    NotACopula(String),

    #[error("grid resolution {n} is below the minimum of {min}")]
    ResolutionTooLow { n: usize, min: usize },

    #[error("operands do not commute under the fold product (sup deviation {deviation:.3e})")]
    NonCommuting { deviation: f64 },

    #[error("marginal mismatch: {0}")]
    MarginalMismatch(String),

    #[error("no evaluable density for {0}")]
    NoDensity(String),

    #[error("sequence entry {index} is not positive ({value:e})")]
    NonPositive { index: usize, value: f64 },

    #[error("malformed spec field `{field}`: {message}")]
    Spec { field: String, message: String },

    #[error("io: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn spec(field: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Spec {
            field: field.into(),
            message: message.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
