//! Trainable analysis/reconstruction pairs: `s(t) = Ut diag(h(t)) U^T x(t)`.

use acoustic_core::{Tape, Tensor, Var};

use crate::error::{invalid, Result};

fn check(u: &[usize], ut: &[usize], x: &[usize], h: &[usize]) -> Result<()> {
    let ok = u.len() == 2
        && u == ut
        && x.len() == 2
        && h.len() == 2
        && x[0] == u[0]
        && h[0] == u[1]
        && h[1] == x[1];
    if ok {
        Ok(())
    } else {
        Err(invalid(
            "learned_analysis",
            format!("shapes U {u:?}, Ut {ut:?}, x {x:?}, h {h:?} do not line up"),
        ))
    }
}

/// Frames `x` `[L_w, T]` with gains `h` `[K, T]` and matrices `[L_w, K]`.
pub fn learned_analysis(u: &Tensor, ut: &Tensor, x: &Tensor, h: &Tensor) -> Result<Tensor> {
    check(u.shape(), ut.shape(), x.shape(), h.shape())?;
    let coeffs = u.transpose().matmul(x)?;
    let gated = coeffs.zip_map(h, |a, b| a * b)?;
    Ok(ut.matmul(&gated)?)
}

/// Tape version for training `U`, `Ut` or the gains.
pub fn learned_analysis_tape(tape: &mut Tape, u: Var, ut: Var, x: Var, h: Var) -> Result<Var> {
    check(
        tape.value(u).shape(),
        tape.value(ut).shape(),
        tape.value(x).shape(),
        tape.value(h).shape(),
    )?;
    let utr = tape.transpose(u)?;
    let coeffs = tape.matmul(utr, x)?;
    let gated = tape.mul(coeffs, h)?;
    Ok(tape.matmul(ut, gated)?)
}
