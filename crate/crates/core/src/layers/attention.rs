use crate::error::{invalid, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;

/// One self-attention head with query/key/value projections.
#[derive(Clone, Debug)]
pub struct AttentionHead {
    pub tq: ParamId,
    pub tk: ParamId,
    pub tv: ParamId,
}

/// Multi-head self-attention over `[D, T]` sequences.
///
/// Scores are plain inner products `k(i)^T q(t)`; there is no `1/sqrt(d)`
/// temperature. Head outputs are stacked along the feature axis.
#[derive(Clone, Debug)]
pub struct Attention {
    pub heads: Vec<AttentionHead>,
    pub key_dim: usize,
    pub value_dim: usize,
}

impl Attention {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        dim: usize,
        heads: usize,
        key_dim: usize,
        value_dim: usize,
        rng: &mut R,
    ) -> Self {
        let std = (1.0 / dim as f64).sqrt();
        let heads = (0..heads)
            .map(|_| AttentionHead {
                tq: store.add("attn.q", Tensor::randn(vec![key_dim, dim], std, rng)),
                tk: store.add("attn.k", Tensor::randn(vec![key_dim, dim], std, rng)),
                tv: store.add("attn.v", Tensor::randn(vec![value_dim, dim], std, rng)),
            })
            .collect();
        Self {
            heads,
            key_dim,
            value_dim,
        }
    }

    /// Output `[heads * value_dim, T]` and per-head weight matrices `[T, T]`
    /// whose column `t` holds the weights over source slices `i`.
    pub fn forward_with_weights(
        &self,
        tape: &mut Tape,
        p: &Bound,
        x: Var,
    ) -> Result<(Var, Vec<Var>)> {
        if self.heads.is_empty() {
            return Err(invalid("attention", "no heads"));
        }
        let mut outs = Vec::with_capacity(self.heads.len());
        let mut weights = Vec::with_capacity(self.heads.len());
        for h in &self.heads {
            let q = tape.matmul(p.var(h.tq), x)?;
            let k = tape.matmul(p.var(h.tk), x)?;
            let v = tape.matmul(p.var(h.tv), x)?;
            let kt = tape.transpose(k)?;
            let scores = tape.matmul(kt, q)?;
            let a = tape.softmax(scores, 0)?;
            outs.push(tape.matmul(v, a)?);
            weights.push(a);
        }
        Ok((tape.concat(&outs, 0)?, weights))
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        Ok(self.forward_with_weights(tape, p, x)?.0)
    }
}
