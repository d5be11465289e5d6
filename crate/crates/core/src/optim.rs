//! Mini-batch gradient descent and Adam.
//!
//! Adam here follows the uncorrected form: the moment estimates are used
//! directly, without dividing by `1 - beta^t`. Early steps are therefore
//! shorter than in bias-corrected implementations.

use crate::error::{invalid, Result, TensorError};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.99,
            eps: 1e-8,
        }
    }
}

/// Adam optimizer state: step counter and smoothed first/second moments.
#[derive(Clone, Debug)]
pub struct Adam {
    pub config: AdamConfig,
    step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

fn check_grads(params: &[Tensor], grads: &[Tensor]) -> Result<()> {
    if params.len() != grads.len() {
        return Err(invalid(
            "optimizer",
            format!("{} parameters but {} gradients", params.len(), grads.len()),
        ));
    }
    for (p, g) in params.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(TensorError::ShapeMismatch {
                op: "optimizer",
                left: p.shape().to_vec(),
                right: g.shape().to_vec(),
            });
        }
        if !g.is_finite() {
            return Err(TensorError::NonFinite { op: "optimizer" });
        }
    }
    Ok(())
}

impl Adam {
    pub fn new(config: AdamConfig) -> Result<Self> {
        let ok = config.lr > 0.0
            && config.beta1 > 0.0
            && config.beta1 <= 1.0
            && config.beta2 > 0.0
            && config.beta2 <= 1.0
            && config.eps > 0.0;
        if !ok {
            return Err(invalid("adam", format!("bad hyperparameters {config:?}")));
        }
        Ok(Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        })
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Tensor] {
        &self.second
    }

    /// One update. On any non-finite result nothing is modified.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<()> {
        check_grads(params, grads)?;
        let c = self.config;
        let fresh = self.first.is_empty();
        let mut first = Vec::with_capacity(params.len());
        let mut second = Vec::with_capacity(params.len());
        let mut updated = Vec::with_capacity(params.len());
        for (i, (p, g)) in params.iter().zip(grads).enumerate() {
            let (m0, v0) = if fresh {
                (Tensor::zeros(p.shape().to_vec()), Tensor::zeros(p.shape().to_vec()))
            } else {
                (self.first[i].clone(), self.second[i].clone())
            };
            let m = m0.zip_map(g, |m, g| c.beta1 * m + (1.0 - c.beta1) * g)?;
            let v = v0.zip_map(g, |v, g| c.beta2 * v + (1.0 - c.beta2) * g * g)?;
            let mut np = p.clone();
            for ((x, &mv), &vv) in np.data_mut().iter_mut().zip(m.data()).zip(v.data()) {
                *x -= c.lr * mv / (vv + c.eps).sqrt();
            }
            if !np.is_finite() || !m.is_finite() || !v.is_finite() {
                return Err(TensorError::NonFinite { op: "adam_step" });
            }
            first.push(m);
            second.push(v);
            updated.push(np);
        }
        for (p, n) in params.iter_mut().zip(updated) {
            *p = n;
        }
        self.first = first;
        self.second = second;
        self.step += 1;
        Ok(())
    }
}

/// Plain gradient descent `theta <- theta - lr * grad`.
pub fn sgd_step(params: &mut [Tensor], grads: &[Tensor], lr: f64) -> Result<()> {
    check_grads(params, grads)?;
    let updated: Vec<Tensor> = params
        .iter()
        .zip(grads)
        .map(|(p, g)| p.zip_map(g, |x, g| x - lr * g))
        .collect::<Result<_>>()?;
    if updated.iter().any(|t| !t.is_finite()) {
        return Err(TensorError::NonFinite { op: "sgd_step" });
    }
    for (p, n) in params.iter_mut().zip(updated) {
        *p = n;
    }
    Ok(())
}
