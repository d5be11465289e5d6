use crate::error::{invalid, Result};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

use super::{log_clamped, one_minus, same_shape, EPS_NUM};

/// Losses comparing probabilities `yhat` with labels `y` of the same shape.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ClassificationKind {
    /// `-sum y ln yhat` for soft or one-hot labels.
    CrossEntropy,
    /// `-sum ln yhat[class]`; labels must be one-hot columns.
    Nll,
    Bce,
    /// BCE with the positive term scaled by `beta`.
    WeightedBce { beta: f64 },
    /// BCE whose positive weight `(c0 / (K + c0))^eta` shrinks with the
    /// class count `K` in the batch (rows are classes, columns samples).
    InverseFrequency { c0: f64, eta: f64 },
    /// Positive term weighted by `(1 - yhat)^eta`, negative by `yhat^eta`.
    AsymmetricFocal { eta: f64 },
    /// Generalized Dice with focal weights `(1 - yhat)^eta`.
    Dice { kappa0: f64, alpha: f64, eta: f64 },
    /// `sum relu(1 - y s)` on raw scores `s` with labels in `{-1, 1}`.
    /// [`hinge_svm`] adds the weight penalty.
    Hinge,
}

fn check_probability_labels(y: &Tensor) -> Result<()> {
    if y.data().iter().any(|v| !(0.0..=1.0).contains(v)) {
        return Err(invalid("classification", "labels must lie in [0, 1]"));
    }
    Ok(())
}

/// `-sum [wp * y ln yhat + wn * (1-y) ln(1-yhat)]`.
fn weighted_binary(
    tape: &mut Tape,
    y: &Tensor,
    yhat: Var,
    pos_weight: Option<Var>,
    neg_weight: Option<Var>,
) -> Result<Var> {
    let ty = tape.leaf(y.clone())?;
    let ln_p = log_clamped(tape, yhat)?;
    let q = one_minus(tape, yhat)?;
    let ln_q = log_clamped(tape, q)?;
    let mut pos = tape.mul(ty, ln_p)?;
    if let Some(w) = pos_weight {
        pos = tape.mul(pos, w)?;
    }
    let ny = tape.leaf(y.map(|v| 1.0 - v))?;
    let mut neg = tape.mul(ny, ln_q)?;
    if let Some(w) = neg_weight {
        neg = tape.mul(neg, w)?;
    }
    let both = tape.add(pos, neg)?;
    let s = tape.sum(both)?;
    tape.neg(s)
}

/// `x^eta` with the base clamped away from zero so fractional powers keep
/// a finite derivative.
fn focal_power(tape: &mut Tape, x: Var, eta: f64) -> Result<Var> {
    if eta < 0.0 {
        return Err(invalid("classification", "eta must be nonnegative"));
    }
    let c = tape.clamp(x, EPS_NUM, 1.0)?;
    tape.pow(c, eta)
}

pub fn classification(
    tape: &mut Tape,
    kind: ClassificationKind,
    y: &Tensor,
    yhat: Var,
) -> Result<Var> {
    same_shape("classification", tape, yhat, y)?;
    if y.is_empty() {
        return Err(invalid("classification", "empty batch"));
    }
    match kind {
        ClassificationKind::CrossEntropy | ClassificationKind::Nll => {
            check_probability_labels(y)?;
            if kind == ClassificationKind::Nll {
                for c in 0..y.cols() {
                    let col = y.col(c);
                    let ones = col.iter().filter(|&&v| v == 1.0).count();
                    let zeros = col.iter().filter(|&&v| v == 0.0).count();
                    if ones != 1 || ones + zeros != col.len() {
                        return Err(invalid("nll", format!("column {c} is not one-hot")));
                    }
                }
            }
            let ty = tape.leaf(y.clone())?;
            let ln = log_clamped(tape, yhat)?;
            let p = tape.mul(ty, ln)?;
            let s = tape.sum(p)?;
            tape.neg(s)
        }
        ClassificationKind::Bce => {
            check_probability_labels(y)?;
            weighted_binary(tape, y, yhat, None, None)
        }
        ClassificationKind::WeightedBce { beta } => {
            check_probability_labels(y)?;
            let w = tape.scalar(beta)?;
            weighted_binary(tape, y, yhat, Some(w), None)
        }
        ClassificationKind::InverseFrequency { c0, eta } => {
            check_probability_labels(y)?;
            if c0 < 0.0 || eta < 0.0 {
                return Err(invalid("ifl", "c0 and eta must be nonnegative"));
            }
            if y.rank() != 2 {
                return Err(invalid("ifl", "labels must be [classes, batch]"));
            }
            let rows = y.rows();
            let weights: Vec<f64> = (0..rows)
                .map(|r| {
                    let k: f64 = y.row(r).iter().sum();
                    if k + c0 == 0.0 {
                        1.0
                    } else {
                        (c0 / (k + c0)).powf(eta)
                    }
                })
                .collect();
            let w = tape.leaf(Tensor::column(weights))?;
            weighted_binary(tape, y, yhat, Some(w), None)
        }
        ClassificationKind::AsymmetricFocal { eta } => {
            check_probability_labels(y)?;
            let q = one_minus(tape, yhat)?;
            let wp = focal_power(tape, q, eta)?;
            let wn = focal_power(tape, yhat, eta)?;
            weighted_binary(tape, y, yhat, Some(wp), Some(wn))
        }
        ClassificationKind::Dice { kappa0, alpha, eta } => {
            check_probability_labels(y)?;
            if kappa0 < 0.0 || !(0.0..=1.0).contains(&alpha) {
                return Err(invalid("dice", "need kappa0 >= 0 and alpha in [0, 1]"));
            }
            let q = one_minus(tape, yhat)?;
            let w = focal_power(tape, q, eta)?;
            let ty = tape.leaf(y.clone())?;
            let wy = tape.mul(w, ty)?;
            let inter = tape.mul(wy, yhat)?;
            let inter = tape.sum(inter)?;
            let num = tape.add_scalar(inter, kappa0)?;
            let y2: f64 = y.data().iter().map(|v| v * v).sum();
            let p2 = tape.square(yhat)?;
            let wp2 = tape.mul(w, p2)?;
            let wp2 = tape.sum(wp2)?;
            let wp2 = tape.scale(wp2, alpha)?;
            let den = tape.add_scalar(wp2, kappa0 + (1.0 - alpha) * y2)?;
            if tape.value(den).item() <= 0.0 {
                return Err(invalid("dice", "denominator vanishes"));
            }
            let ratio = tape.div(num, den)?;
            one_minus(tape, ratio)
        }
        ClassificationKind::Hinge => {
            if y.data().iter().any(|&v| v != 1.0 && v != -1.0) {
                return Err(invalid("hinge", "labels must be -1 or 1"));
            }
            let ty = tape.leaf(y.clone())?;
            let m = tape.mul(ty, yhat)?;
            let slack = one_minus(tape, m)?;
            let r = tape.relu(slack)?;
            tape.sum(r)
        }
    }
}

/// Soft-margin SVM objective `sum relu(1 - y (w^T z + b)) + lambda ||w||^2`.
pub fn hinge_svm(tape: &mut Tape, y: &Tensor, scores: Var, w: Var, lambda: f64) -> Result<Var> {
    let h = classification(tape, ClassificationKind::Hinge, y, scores)?;
    let w2 = tape.square(w)?;
    let w2 = tape.sum(w2)?;
    let pen = tape.scale(w2, lambda)?;
    tape.add(h, pen)
}

/// Linear-softmax clip scores `sum_t yhat^2 / sum_t yhat` of frame
/// probabilities `[L, T]`, giving `[L, 1]`. Rows with zero mass score 0.
pub fn clip_scores(tape: &mut Tape, frames: Var) -> Result<Var> {
    let sq = tape.square(frames)?;
    let num = tape.sum_axis(sq, 1)?;
    let den = tape.sum_axis(frames, 1)?;
    let guard = tape.value(den).map(|d| if d == 0.0 { 1.0 } else { 0.0 });
    let guard = tape.leaf(guard)?;
    let den = tape.add(den, guard)?;
    tape.div(num, den)
}

/// Weak-label objective: clip scores of each `[L, T]` frame matrix are
/// compared with clip labels `[L, B]` by BCE.
pub fn super_resolution(tape: &mut Tape, frames: &[Var], labels: &Tensor) -> Result<Var> {
    if frames.is_empty() {
        return Err(invalid("super_resolution", "empty batch"));
    }
    let scores = frames
        .iter()
        .map(|&f| clip_scores(tape, f))
        .collect::<Result<Vec<_>>>()?;
    let clip = tape.concat(&scores, 1)?;
    classification(tape, ClassificationKind::Bce, labels, clip)
}
