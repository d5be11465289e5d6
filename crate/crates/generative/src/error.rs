use acoustic_core::TensorError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GenerativeError {
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: String },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, GenerativeError>;

pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> GenerativeError {
    GenerativeError::Invalid {
        op,
        reason: reason.into(),
    }
}
