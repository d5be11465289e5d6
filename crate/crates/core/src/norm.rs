//! Batch/layer normalization and inverted dropout.
//!
//! Both normalizers act on `[D, N]` tensors and compute statistics along the
//! second axis: batch norm shares them across the `N` samples of a batch,
//! layer norm across the `N` time slices of a single sequence.

use crate::error::{invalid, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NormKind {
    Batch,
    Layer,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Decay of the running statistics kept for batch-norm inference.
pub const RUNNING_DECAY: f64 = 0.9;

#[derive(Clone, Debug)]
pub struct NormState {
    pub kind: NormKind,
    pub gamma: ParamId,
    pub beta: ParamId,
    pub running_mean: Tensor,
    pub running_var: Tensor,
    pub eps: f64,
}

impl NormState {
    pub fn new(store: &mut ParamStore, kind: NormKind, features: usize, eps: f64) -> Self {
        let gamma = store.add("norm.gamma", Tensor::ones(vec![features, 1]));
        let beta = store.add("norm.beta", Tensor::zeros(vec![features, 1]));
        Self {
            kind,
            gamma,
            beta,
            running_mean: Tensor::zeros(vec![features, 1]),
            running_var: Tensor::ones(vec![features, 1]),
            eps,
        }
    }

    /// `(x - mu) / sqrt(phi + eps) * gamma + beta`.
    pub fn forward(&mut self, tape: &mut Tape, p: &Bound, x: Var, mode: Mode) -> Result<Var> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 2 {
            return Err(invalid("normalize", format!("expected [D, N], got {shape:?}")));
        }
        let frozen = self.kind == NormKind::Batch && mode == Mode::Infer;
        if self.kind == NormKind::Batch && mode == Mode::Train && shape[1] < 2 {
            return Err(invalid("normalize", "batch norm training needs at least 2 samples"));
        }
        let (mu, var) = if frozen {
            (
                tape.leaf(self.running_mean.clone())?,
                tape.leaf(self.running_var.clone())?,
            )
        } else {
            let mu = tape.mean_axis(x, 1)?;
            let centered = tape.sub(x, mu)?;
            let sq = tape.square(centered)?;
            let var = tape.mean_axis(sq, 1)?;
            (mu, var)
        };
        if self.kind == NormKind::Batch && mode == Mode::Train {
            let (m, v) = (tape.value(mu).clone(), tape.value(var).clone());
            self.running_mean = self.running_mean.zip_map(&m, |r, b| {
                RUNNING_DECAY * r + (1.0 - RUNNING_DECAY) * b
            })?;
            self.running_var = self.running_var.zip_map(&v, |r, b| {
                RUNNING_DECAY * r + (1.0 - RUNNING_DECAY) * b
            })?;
        }
        let centered = tape.sub(x, mu)?;
        let denom = tape.add_scalar(var, self.eps)?;
        let denom = tape.sqrt(denom)?;
        let z = tape.div(centered, denom)?;
        let z = tape.mul(z, p.var(self.gamma))?;
        tape.add(z, p.var(self.beta))
    }
}

/// Inverted dropout: survivors are scaled by `1 / (1 - rate)`.
pub fn dropout<R: Rng + ?Sized>(
    tape: &mut Tape,
    x: Var,
    rate: f64,
    rng: &mut R,
    mode: Mode,
) -> Result<Var> {
    if !(0.0..1.0).contains(&rate) {
        return Err(invalid("dropout", format!("rate {rate} outside [0,1)")));
    }
    if mode == Mode::Infer || rate == 0.0 {
        return Ok(x);
    }
    let keep = 1.0 / (1.0 - rate);
    let shape = tape.value(x).shape().to_vec();
    let mut mask = Tensor::zeros(shape);
    for m in mask.data_mut() {
        *m = if rng.random::<f64>() < rate { 0.0 } else { keep };
    }
    let mask = tape.leaf(mask)?;
    tape.mul(x, mask)
}
