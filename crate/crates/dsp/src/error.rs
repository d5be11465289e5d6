use acoustic_core::TensorError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DspError {
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: String },
    #[error("window system infeasible, residual norm {residual:.3e}")]
    Infeasible { residual: f64 },
    #[error("signal of {len} samples is shorter than the {window}-sample window")]
    TooShort { len: usize, window: usize },
    #[error("geometry has rank {rank}, need at least {needed}")]
    RankDeficient { rank: usize, needed: usize },
    #[error("wav: {0}")]
    Wav(#[from] hound::Error),
    #[error(transparent)]
    Tensor(#[from] TensorError),
}

pub type Result<T> = std::result::Result<T, DspError>;

pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> DspError {
    DspError::Invalid {
        op,
        reason: reason.into(),
    }
}
