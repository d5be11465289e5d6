use std::f64::consts::LN_10;

use crate::error::{invalid, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

use super::same_shape;

/// Guard added to both energies of the SI-SDR ratio.
pub const SDR_EPS: f64 = 1e-12;

/// Largest source count accepted by exhaustive permutation search.
pub const PIT_MAX_SOURCES: usize = 4;

/// SI-SDR in dB of one estimate against one reference.
pub fn si_sdr_value(target: &[f64], estimate: &[f64]) -> Result<f64> {
    if target.len() != estimate.len() || target.is_empty() {
        return Err(invalid("si_sdr", "signals must have equal, nonzero length"));
    }
    let ss: f64 = target.iter().map(|v| v * v).sum();
    if ss == 0.0 {
        return Err(invalid("si_sdr", "zero target"));
    }
    let a = target.iter().zip(estimate).map(|(s, e)| s * e).sum::<f64>() / ss;
    let signal = a * a * ss;
    let noise: f64 = target
        .iter()
        .zip(estimate)
        .map(|(s, e)| (a * s - e).powi(2))
        .sum();
    Ok(10.0 * ((signal + SDR_EPS) / (noise + SDR_EPS)).log10())
}

/// Per-column SI-SDR `[1, J]` of estimates `[N, J]` against targets.
pub fn si_sdr(tape: &mut Tape, targets: &Tensor, estimates: Var) -> Result<Var> {
    same_shape("si_sdr", tape, estimates, targets)?;
    if targets.rank() != 2 {
        return Err(invalid("si_sdr", "expected [samples, sources]"));
    }
    let cols = targets.cols();
    let energy: Vec<f64> = (0..cols)
        .map(|c| targets.col(c).iter().map(|v| v * v).sum())
        .collect();
    if energy.iter().any(|&e| e == 0.0) {
        return Err(invalid("si_sdr", "zero target"));
    }
    let s = tape.leaf(targets.clone())?;
    let inv_energy = tape.leaf(Tensor::matrix(1, cols, energy.iter().map(|e| 1.0 / e).collect())?)?;
    let dot = tape.mul(s, estimates)?;
    let dot = tape.sum_axis(dot, 0)?;
    let alpha = tape.mul(dot, inv_energy)?;
    let proj = tape.mul(s, alpha)?;
    let p2 = tape.square(proj)?;
    let num = tape.sum_axis(p2, 0)?;
    let num = tape.add_scalar(num, SDR_EPS)?;
    let err = tape.sub(proj, estimates)?;
    let e2 = tape.square(err)?;
    let den = tape.sum_axis(e2, 0)?;
    let den = tape.add_scalar(den, SDR_EPS)?;
    let ln_num = tape.log(num)?;
    let ln_den = tape.log(den)?;
    let d = tape.sub(ln_num, ln_den)?;
    tape.scale(d, 10.0 / LN_10)
}

/// Negative summed SI-SDR, for minimization.
pub fn si_sdr_loss(tape: &mut Tape, targets: &Tensor, estimates: Var) -> Result<Var> {
    let v = si_sdr(tape, targets, estimates)?;
    let s = tape.sum(v)?;
    tape.neg(s)
}

/// `sum (mask * |X| - |S|)^2` over all bins and frames.
pub fn spectral_distance(
    tape: &mut Tape,
    mask: Var,
    mixture_mag: &Tensor,
    target_mag: &Tensor,
) -> Result<Var> {
    same_shape("spectral_distance", tape, mask, mixture_mag)?;
    same_shape("spectral_distance", tape, mask, target_mag)?;
    let x = tape.leaf(mixture_mag.clone())?;
    let s = tape.leaf(target_mag.clone())?;
    let est = tape.mul(mask, x)?;
    let e = tape.sub(est, s)?;
    let e2 = tape.square(e)?;
    tape.sum(e2)
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                go(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::with_capacity(n), &mut vec![false; n], &mut out);
    out
}

fn check_square<T>(d: &[Vec<T>]) -> Result<usize> {
    let j = d.len();
    if j == 0 || d.iter().any(|row| row.len() != j) {
        return Err(invalid("pit", "cost matrix must be square and nonempty"));
    }
    if j > PIT_MAX_SOURCES {
        return Err(invalid("pit", format!("{j} sources exceed the limit of {PIT_MAX_SOURCES}")));
    }
    Ok(j)
}

/// Minimum of `sum_j d[j][p_j]` over permutations `p`, with the
/// lexicographically first minimizer.
pub fn pit(d: &[Vec<f64>]) -> Result<(f64, Vec<usize>)> {
    let j = check_square(d)?;
    if d.iter().flatten().any(|v| !v.is_finite()) {
        return Err(invalid("pit", "non-finite cost"));
    }
    let mut best: Option<(f64, Vec<usize>)> = None;
    for p in permutations(j) {
        let c: f64 = p.iter().enumerate().map(|(r, &c)| d[r][c]).sum();
        if best.as_ref().is_none_or(|(b, _)| c < *b) {
            best = Some((c, p));
        }
    }
    Ok(best.expect("at least one permutation"))
}

/// Tape version of [`pit`]: picks the best assignment by value and returns
/// the sum of the chosen cost nodes, so gradients flow only through it.
pub fn pit_select(tape: &mut Tape, d: &[Vec<Var>]) -> Result<(Var, Vec<usize>)> {
    check_square(d)?;
    let values: Vec<Vec<f64>> = d
        .iter()
        .map(|row| row.iter().map(|&v| tape.value(v).item()).collect())
        .collect();
    let (_, perm) = pit(&values)?;
    let mut total = d[0][perm[0]];
    for (r, &c) in perm.iter().enumerate().skip(1) {
        total = tape.add(total, d[r][c])?;
    }
    Ok((total, perm))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClusteringVariant {
    /// `||V^T V - U^T U||^2`, evaluated through the small `L x L` Gram
    /// products.
    Frobenius,
    /// `L - tr[(V V^T)^-1 V U^T (U U^T)^-1 U V^T]` with a `1e-8` ridge.
    Trace,
}

const CLUSTER_RIDGE: f64 = 1e-8;

/// Deep-clustering loss of embeddings `V` `[L, N]` against one-hot source
/// memberships `U` `[L', N]`.
pub fn deep_clustering(
    tape: &mut Tape,
    v: Var,
    u: &Tensor,
    variant: ClusteringVariant,
) -> Result<Var> {
    let vs = tape.value(v).shape().to_vec();
    if vs.len() != 2 || u.rank() != 2 || vs[1] != u.cols() {
        return Err(crate::error::TensorError::ShapeMismatch {
            op: "deep_clustering",
            left: vs,
            right: u.shape().to_vec(),
        });
    }
    let l = vs[0];
    let ut = tape.leaf(u.transpose())?;
    let vt = tape.transpose(v)?;
    let vv = tape.matmul(v, vt)?;
    let vu = tape.matmul(v, ut)?;
    let uu = u.matmul(&u.transpose())?;
    match variant {
        ClusteringVariant::Frobenius => {
            let a = tape.square(vv)?;
            let a = tape.sum(a)?;
            let b = tape.square(vu)?;
            let b = tape.sum(b)?;
            let b = tape.scale(b, -2.0)?;
            let c: f64 = uu.data().iter().map(|x| x * x).sum();
            let ab = tape.add(a, b)?;
            tape.add_scalar(ab, c)
        }
        ClusteringVariant::Trace => {
            let ridge_v = tape.leaf(Tensor::identity(l).scale(CLUSTER_RIDGE))?;
            let vv = tape.add(vv, ridge_v)?;
            let vv_inv = tape.inverse(vv)?;
            let mut uu_r = uu;
            for i in 0..uu_r.rows() {
                let d = uu_r.at(i, i);
                uu_r.set(i, i, d + CLUSTER_RIDGE);
            }
            let uu_inv = tape.leaf(uu_r)?;
            let uu_inv = tape.inverse(uu_inv)?;
            let uv = tape.transpose(vu)?;
            let m = tape.matmul(vv_inv, vu)?;
            let m = tape.matmul(m, uu_inv)?;
            let m = tape.matmul(m, uv)?;
            let eye = tape.leaf(Tensor::identity(l))?;
            let diag = tape.mul(m, eye)?;
            let tr = tape.sum(diag)?;
            let neg = tape.neg(tr)?;
            tape.add_scalar(neg, l as f64)
        }
    }
}
