use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DetectError {
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: String },
}

pub type Result<T> = std::result::Result<T, DetectError>;

pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> DetectError {
    DetectError::Invalid {
        op,
        reason: reason.into(),
    }
}
