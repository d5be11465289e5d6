use acoustic_core::TensorError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransformError {
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: String },
    #[error("{op}: matrix is singular; add a ridge")]
    Singular { op: &'static str },
    #[error("transport marginals sum to {p} and {q}")]
    Infeasible { p: f64, q: f64 },
    #[error("t-SNE objective became non-finite at iteration {iteration}")]
    NonFinite { iteration: usize },
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, TransformError>;

pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> TransformError {
    TransformError::Invalid {
        op,
        reason: reason.into(),
    }
}
