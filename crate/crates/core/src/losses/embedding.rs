use std::collections::VecDeque;

use crate::error::{invalid, Result};
use crate::params::ParamStore;
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

use super::EPS_NUM;

fn columns_match(op: &'static str, tape: &Tape, a: Var, b: Var) -> Result<()> {
    let (sa, sb) = (tape.value(a).shape(), tape.value(b).shape());
    if sa != sb || sa.len() != 2 {
        return Err(crate::error::TensorError::ShapeMismatch {
            op,
            left: sa.to_vec(),
            right: sb.to_vec(),
        });
    }
    Ok(())
}

/// Scale every column of `[D, B]` to unit length. Zero columns are rejected.
pub fn normalize_columns(tape: &mut Tape, z: Var) -> Result<Var> {
    let sq = tape.square(z)?;
    let n2 = tape.sum_axis(sq, 0)?;
    if tape.value(n2).data().iter().any(|&v| v <= 0.0) {
        return Err(invalid("normalize_columns", "zero-norm embedding"));
    }
    let n = tape.sqrt(n2)?;
    tape.div(z, n)
}

/// Cosine similarities `S[n, i]` between columns of `a` and of `b`.
pub fn cosine_matrix(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let na = normalize_columns(tape, a)?;
    let nb = normalize_columns(tape, b)?;
    let at = tape.transpose(na)?;
    tape.matmul(at, nb)
}

fn squared_distances(tape: &mut Tape, a: Var, b: Var) -> Result<Var> {
    let d = tape.sub(a, b)?;
    let sq = tape.square(d)?;
    tape.sum_axis(sq, 0)
}

/// Pair loss `p d^2 + (1 - p) max(0, margin - d^2)` with `d^2` the squared
/// distance between matching columns and `p = 1` for same-class pairs.
pub fn contrastive(tape: &mut Tape, a: Var, b: Var, same: &[bool], margin: f64) -> Result<Var> {
    columns_match("contrastive", tape, a, b)?;
    if same.len() != tape.value(a).cols() {
        return Err(invalid("contrastive", "one flag per pair required"));
    }
    if margin < 0.0 {
        return Err(invalid("contrastive", "margin must be nonnegative"));
    }
    let d2 = squared_distances(tape, a, b)?;
    let pos = tape.leaf(Tensor::matrix(1, same.len(), same.iter().map(|&s| f64::from(u8::from(s))).collect())?)?;
    let neg = tape.leaf(tape.value(pos).map(|p| 1.0 - p))?;
    let attract = tape.mul(pos, d2)?;
    let gap = tape.neg(d2)?;
    let gap = tape.add_scalar(gap, margin)?;
    let gap = tape.relu(gap)?;
    let repel = tape.mul(neg, gap)?;
    let both = tape.add(attract, repel)?;
    tape.sum(both)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TripletDistance {
    /// `sqrt(||a - b||^2 + EPS_NUM)`; the offset keeps coincident points
    /// differentiable.
    #[default]
    Euclidean,
    Squared,
}

/// `sum max(0, margin + D(anchor, positive) - D(anchor, negative))`.
pub fn triplet(
    tape: &mut Tape,
    anchor: Var,
    positive: Var,
    negative: Var,
    margin: f64,
    distance: TripletDistance,
) -> Result<Var> {
    columns_match("triplet", tape, anchor, positive)?;
    columns_match("triplet", tape, anchor, negative)?;
    if margin < 0.0 {
        return Err(invalid("triplet", "margin must be nonnegative"));
    }
    let mut dp = squared_distances(tape, anchor, positive)?;
    let mut dn = squared_distances(tape, anchor, negative)?;
    if distance == TripletDistance::Euclidean {
        dp = tape.add_scalar(dp, EPS_NUM)?;
        dp = tape.sqrt(dp)?;
        dn = tape.add_scalar(dn, EPS_NUM)?;
        dn = tape.sqrt(dn)?;
    }
    let d = tape.sub(dp, dn)?;
    let d = tape.add_scalar(d, margin)?;
    let h = tape.relu(d)?;
    tape.sum(h)
}

/// Softmax-contrastive loss over a batch and its augmented views.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NtXent {
    /// Similarity sharpness; logits are `scale / tau * S`.
    pub scale: f64,
    pub tau: f64,
    /// Subtracted from the positive similarity before scaling.
    pub margin: f64,
}

impl Default for NtXent {
    fn default() -> Self {
        Self {
            scale: 1.0,
            tau: 1.0,
            margin: 0.0,
        }
    }
}

/// `-sum_n ln softmax_i(s * (S[n, i] - margin [i = n]))[n]` with cosine
/// similarities between `z` and the augmented views `views`, both `[D, B]`.
pub fn ntxent(tape: &mut Tape, z: Var, views: Var, cfg: NtXent) -> Result<Var> {
    columns_match("ntxent", tape, z, views)?;
    if cfg.tau <= 0.0 || cfg.scale <= 0.0 {
        return Err(invalid("ntxent", "scale and tau must be positive"));
    }
    let b = tape.value(z).cols();
    let s = cfg.scale / cfg.tau;
    let sim = cosine_matrix(tape, z, views)?;
    let logits = tape.scale(sim, s)?;
    let shift = tape.leaf(Tensor::identity(b).scale(-s * cfg.margin))?;
    let logits = tape.add(logits, shift)?;
    let ls = tape.log_softmax(logits, 1)?;
    let eye = tape.leaf(Tensor::identity(b))?;
    let diag = tape.mul(ls, eye)?;
    let total = tape.sum(diag)?;
    tape.neg(total)
}

/// Queue of unit-norm negative keys plus the key-encoder momentum.
#[derive(Clone, Debug)]
pub struct MocoDictionary {
    dim: usize,
    capacity: usize,
    momentum: f64,
    keys: VecDeque<Vec<f64>>,
}

impl MocoDictionary {
    pub fn new(dim: usize, capacity: usize, momentum: f64) -> Result<Self> {
        if dim == 0 || capacity == 0 {
            return Err(invalid("moco", "dimension and capacity must be positive"));
        }
        if !(momentum > 0.0 && momentum < 1.0) {
            return Err(invalid("moco", "momentum must lie in (0, 1)"));
        }
        Ok(Self {
            dim,
            capacity,
            momentum,
            keys: VecDeque::with_capacity(capacity),
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn momentum(&self) -> f64 {
        self.momentum
    }

    /// Enqueue every column of `[D, B]` after normalization, evicting the
    /// oldest keys once full.
    pub fn push(&mut self, keys: &Tensor) -> Result<()> {
        if keys.rank() != 2 || keys.rows() != self.dim {
            return Err(invalid("moco", format!("expected [{}, B] keys, got {:?}", self.dim, keys.shape())));
        }
        for c in 0..keys.cols() {
            let col = keys.col(c);
            let n = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n == 0.0 {
                return Err(invalid("moco", "zero-norm key"));
            }
            if self.keys.len() == self.capacity {
                self.keys.pop_front();
            }
            self.keys.push_back(col.into_iter().map(|v| v / n).collect());
        }
        Ok(())
    }

    /// Keys as columns of a `[D, K]` matrix.
    pub fn matrix(&self) -> Option<Tensor> {
        if self.keys.is_empty() {
            return None;
        }
        let k = self.keys.len();
        let mut t = Tensor::zeros(vec![self.dim, k]);
        for (j, key) in self.keys.iter().enumerate() {
            for (i, &v) in key.iter().enumerate() {
                t.set(i, j, v);
            }
        }
        Some(t)
    }

    /// Key-encoder update `theta' <- a theta' + (1 - a) theta`.
    pub fn update_key_encoder(&self, key: &mut ParamStore, query: &ParamStore) {
        key.ema_from(query, self.momentum);
    }
}

/// Momentum-contrast loss. Queries `[D, B]` are scored against their
/// detached positive keys and every dictionary key; the positive term is
/// part of the softmax normalizer.
pub fn moco(
    tape: &mut Tape,
    queries: Var,
    positive_keys: &Tensor,
    dict: &MocoDictionary,
    tau: f64,
) -> Result<Var> {
    if tau <= 0.0 {
        return Err(invalid("moco", "tau must be positive"));
    }
    if tape.value(queries).shape() != positive_keys.shape() {
        return Err(crate::error::TensorError::ShapeMismatch {
            op: "moco",
            left: tape.value(queries).shape().to_vec(),
            right: positive_keys.shape().to_vec(),
        });
    }
    let q = normalize_columns(tape, queries)?;
    let k = tape.leaf(positive_keys.clone())?;
    let k = normalize_columns(tape, k)?;
    let pk = tape.mul(q, k)?;
    let pos = tape.sum_axis(pk, 0)?;
    let logits = match dict.matrix() {
        Some(d) => {
            let dt = tape.leaf(d.transpose())?;
            let neg = tape.matmul(dt, q)?;
            tape.concat(&[pos, neg], 0)?
        }
        None => pos,
    };
    let logits = tape.scale(logits, 1.0 / tau)?;
    let ls = tape.log_softmax(logits, 0)?;
    let first = tape.slice(ls, 0, 0, 1)?;
    let total = tape.sum(first)?;
    tape.neg(total)
}
