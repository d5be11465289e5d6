use crate::error::{invalid, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

use super::softplus;

/// Detached weights of the AUC surrogate. For each positive score `s`,
/// the share of negatives scoring at least `s`; for each negative score
/// `s`, the share of positives scoring at most `s`. Ties count on both
/// sides so every misordered or tied pair is covered.
pub fn auc_weights(pos: &[f64], neg: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (np, nn) = (pos.len() as f64, neg.len() as f64);
    let wp = pos
        .iter()
        .map(|&s| neg.iter().filter(|&&m| m >= s).count() as f64 / nn)
        .collect();
    let wn = neg
        .iter()
        .map(|&s| pos.iter().filter(|&&n| n <= s).count() as f64 / np)
        .collect();
    (wp, wn)
}

/// Differentiable upper bound on `1 - AUC`:
/// `(1/N+) sum f_n ln(1 + e^(1 - s_n)) + (1/N-) sum g_m ln(1 + e^(s_m))`
/// with weights from [`auc_weights`] held constant.
pub fn auc_surrogate(tape: &mut Tape, pos: Var, neg: Var) -> Result<Var> {
    let (p, n) = (tape.value(pos).clone(), tape.value(neg).clone());
    if p.is_empty() || n.is_empty() {
        return Err(invalid("auc_surrogate", "both score sets must be nonempty"));
    }
    let (wp, wn) = auc_weights(p.data(), n.data());
    let scale_p = 1.0 / p.len() as f64;
    let scale_n = 1.0 / n.len() as f64;
    let wp = tape.leaf(Tensor::new(p.shape().to_vec(), wp.iter().map(|w| w * scale_p).collect())?)?;
    let wn = tape.leaf(Tensor::new(n.shape().to_vec(), wn.iter().map(|w| w * scale_n).collect())?)?;
    let shifted = tape.neg(pos)?;
    let shifted = tape.add_scalar(shifted, 1.0)?;
    let lp = softplus(tape, shifted)?;
    let lp = tape.mul(lp, wp)?;
    let lp = tape.sum(lp)?;
    let ln = softplus(tape, neg)?;
    let ln = tape.mul(ln, wn)?;
    let ln = tape.sum(ln)?;
    tape.add(lp, ln)
}
