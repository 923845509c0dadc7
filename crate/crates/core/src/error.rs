use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ill-conditioned frame: smallest Gram eigenvalue {smallest:.3e} (condition number {condition:.3e})")]
    Conditioning { smallest: f64, condition: f64 },

    #[error("{module}: {message}")]
    Domain {
        module: &'static str,
        message: String,
    },

    #[error("degree overflow: need total degree {needed}, truncation allows {allowed}")]
    Truncation { needed: usize, allowed: usize },

    #[error("unitarity drift {drift:.3e} exceeds budget {budget:.3e}; reduce the step size")]
    StepSize { drift: f64, budget: f64 },

    #[error("inadmissible slice point: {0}")]
    Constraint(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(module: &'static str, message: impl Into<String>) -> Self {
        Error::Domain {
            module,
            message: message.into(),
        }
    }
}
