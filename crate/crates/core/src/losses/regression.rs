use crate::error::{invalid, Result};
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegressionKind {
    /// `sum ||y - yhat||^2`.
    Mse,
    /// `sum |y - yhat|`.
    L1,
    /// Quadratic below `delta`, linear above.
    Huber(f64),
}

pub fn regression(tape: &mut Tape, kind: RegressionKind, y: Var, yhat: Var) -> Result<Var> {
    if tape.value(y).shape() != tape.value(yhat).shape() {
        return Err(crate::error::TensorError::ShapeMismatch {
            op: "regression",
            left: tape.value(y).shape().to_vec(),
            right: tape.value(yhat).shape().to_vec(),
        });
    }
    let e = tape.sub(yhat, y)?;
    let per = match kind {
        RegressionKind::Mse => tape.square(e)?,
        RegressionKind::L1 => tape.abs(e)?,
        RegressionKind::Huber(delta) => tape.huber(e, delta)?,
    };
    tape.sum(per)
}

/// Weighted squared distance between matching intermediate features,
/// `sum_k w_k ||z_k - zhat_k||^2`. Typically fed with the per-layer outputs
/// of one extractor applied to the reference and to the estimate.
pub fn feature_constraint(
    tape: &mut Tape,
    reference: &[Var],
    estimate: &[Var],
    weights: Option<&[f64]>,
) -> Result<Var> {
    if reference.len() != estimate.len() || reference.is_empty() {
        return Err(invalid("feature_constraint", "need matching, nonempty feature lists"));
    }
    if let Some(w) = weights {
        if w.len() != reference.len() {
            return Err(invalid("feature_constraint", "one weight per layer required"));
        }
    }
    let mut total = None;
    for (k, (&z, &zh)) in reference.iter().zip(estimate).enumerate() {
        let d = regression(tape, RegressionKind::Mse, z, zh)?;
        let d = match weights {
            Some(w) => tape.scale(d, w[k])?,
            None => d,
        };
        total = Some(match total {
            Some(t) => tape.add(t, d)?,
            None => d,
        });
    }
    Ok(total.expect("nonempty"))
}

/// Encoder/decoder consistency `||x - D(E(x))||^2`.
pub fn consistency(tape: &mut Tape, x: Var, reconstruction: Var) -> Result<Var> {
    regression(tape, RegressionKind::Mse, x, reconstruction)
}
