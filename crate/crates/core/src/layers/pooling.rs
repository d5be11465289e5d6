use crate::error::{invalid, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;

use super::dense::Dense;
use crate::tape::Activation;

/// Attentive fusion: a scoring net maps every slice to a scalar score, the
/// scores are softmax-normalized over time, and the (optionally projected)
/// slices are averaged with those weights.
#[derive(Clone, Debug)]
pub struct Attentive {
    pub hidden: Dense,
    pub score: Dense,
    pub projection: Option<ParamId>,
}

#[derive(Clone, Debug)]
pub enum PoolingHead {
    Mean,
    Attentive(Attentive),
    /// Mean and population standard deviation `sqrt(var + eps)`.
    Stats { eps: f64 },
}

impl PoolingHead {
    pub fn attentive<R: Rng + ?Sized>(
        store: &mut ParamStore,
        dim: usize,
        hidden: usize,
        projection: Option<usize>,
        rng: &mut R,
    ) -> Self {
        let h = Dense::new(store, dim, hidden, Activation::Tanh, rng);
        let s = Dense::new(store, hidden, 1, Activation::Identity, rng);
        let projection = projection.map(|out| {
            let std = (1.0 / dim as f64).sqrt();
            store.add("pool.v", Tensor::randn(vec![out, dim], std, rng))
        });
        PoolingHead::Attentive(Attentive {
            hidden: h,
            score: s,
            projection,
        })
    }

    /// Output dimension for input depth `dim`.
    pub fn output_dim(&self, dim: usize, store: &ParamStore) -> usize {
        match self {
            PoolingHead::Mean => dim,
            PoolingHead::Stats { .. } => 2 * dim,
            PoolingHead::Attentive(a) => a.projection.map_or(dim, |v| store.get(v).shape()[0]),
        }
    }

    /// Pool a `[D, T]` sequence into a `[D', 1]` column. The second value
    /// holds the attentive weights `[1, T]` when applicable.
    pub fn forward_with_weights(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: Var,
    ) -> Result<(Var, Option<Var>)> {
        let shape = tape.value(x).shape().to_vec();
        if shape.len() != 2 {
            return Err(invalid("pool", format!("expected [D, T], got {shape:?}")));
        }
        match self {
            PoolingHead::Mean => Ok((tape.mean_axis(x, 1)?, None)),
            PoolingHead::Stats { eps } => {
                let mu = tape.mean_axis(x, 1)?;
                let centered = tape.sub(x, mu)?;
                let sq = tape.square(centered)?;
                let var = tape.mean_axis(sq, 1)?;
                let var = tape.add_scalar(var, *eps)?;
                let sigma = tape.sqrt(var)?;
                Ok((tape.concat(&[mu, sigma], 0)?, None))
            }
            PoolingHead::Attentive(a) => {
                let h = a.hidden.forward(tape, p, x)?;
                let scores = a.score.forward(tape, p, h)?;
                let alpha = tape.softmax(scores, 1)?;
                let v = match a.projection {
                    Some(proj) => tape.matmul(p.var(proj), x)?,
                    None => x,
                };
                let at = tape.transpose(alpha)?;
                Ok((tape.matmul(v, at)?, Some(alpha)))
            }
        }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        Ok(self.forward_with_weights(tape, p, x)?.0)
    }
}

/// `x + inner(x)`; the inner map must preserve shape.
pub fn residual(
    tape: &mut Tape,
    x: Var,
    inner: impl FnOnce(&mut Tape, Var) -> Result<Var>,
) -> Result<Var> {
    let y = inner(tape, x)?;
    if tape.value(y).shape() != tape.value(x).shape() {
        return Err(crate::error::TensorError::ShapeMismatch {
            op: "residual",
            left: tape.value(x).shape().to_vec(),
            right: tape.value(y).shape().to_vec(),
        });
    }
    tape.add(x, y)
}
