use acoustic_core::Tensor;
use thiserror::Error;

/// Model state captured when training diverges.
#[derive(Clone, Debug)]
pub struct StateDump {
    pub epoch: usize,
    pub step: usize,
    pub loss: f64,
    pub names: Vec<String>,
    pub params: Vec<Tensor>,
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{op}: {reason}")]
    Invalid { op: &'static str, reason: String },
    #[error("training diverged at epoch {} step {} (loss {})", .0.epoch, .0.step, .0.loss)]
    Diverged(Box<StateDump>),
    #[error(transparent)]
    Tensor(#[from] acoustic_core::TensorError),
    #[error(transparent)]
    Dsp(#[from] acoustic_dsp::DspError),
    #[error(transparent)]
    Detect(#[from] acoustic_detect::DetectError),
}

pub type Result<T> = std::result::Result<T, PipelineError>;

pub(crate) fn invalid(op: &'static str, reason: impl Into<String>) -> PipelineError {
    PipelineError::Invalid {
        op,
        reason: reason.into(),
    }
}
