//! Scalar training objectives built from tape primitives.
//!
//! Batches are stored column-wise (`[features, B]`) and every loss reduces
//! by summation over the batch. Logarithms see their argument clamped to
//! `[EPS_NUM, 1]` so saturated predictions stay finite.

pub mod classification;
pub mod embedding;
pub mod ranking;
pub mod regression;
pub mod separation;

pub use classification::{
    classification, clip_scores, hinge_svm, super_resolution, ClassificationKind,
};
pub use embedding::{
    contrastive, cosine_matrix, moco, normalize_columns, ntxent, triplet, MocoDictionary,
    NtXent, TripletDistance,
};
pub use ranking::{auc_surrogate, auc_weights};
pub use regression::{consistency, feature_constraint, regression, RegressionKind};
pub use separation::{
    deep_clustering, pit, pit_select, si_sdr, si_sdr_loss, si_sdr_value, spectral_distance,
    ClusteringVariant, PIT_MAX_SOURCES,
};

use crate::error::{Result, TensorError};
use crate::tape::{Tape, Var};
use crate::tensor::Tensor;

/// Lower bound applied to probabilities before taking logarithms.
pub const EPS_NUM: f64 = 1e-12;

/// Losses used to train direction-of-arrival networks.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DoaLoss {
    /// Squared distance to direction vectors or ACCDOA targets.
    NormDistance,
    /// Softmax cross-entropy over grid cells (one source per frame).
    CrossEntropy,
    /// Per-cell BCE with the positive term weighted by `alpha`.
    WeightedBce { alpha: f64 },
}

pub fn doa_loss(tape: &mut Tape, kind: DoaLoss, y: &Tensor, yhat: Var) -> Result<Var> {
    match kind {
        DoaLoss::NormDistance => {
            let t = tape.leaf(y.clone())?;
            regression(tape, RegressionKind::Mse, t, yhat)
        }
        DoaLoss::CrossEntropy => classification(tape, ClassificationKind::CrossEntropy, y, yhat),
        DoaLoss::WeightedBce { alpha } => {
            classification(tape, ClassificationKind::WeightedBce { beta: alpha }, y, yhat)
        }
    }
}

pub(crate) fn same_shape(op: &'static str, tape: &Tape, a: Var, b: &Tensor) -> Result<()> {
    let sa = tape.value(a).shape();
    if sa != b.shape() {
        return Err(TensorError::ShapeMismatch {
            op,
            left: sa.to_vec(),
            right: b.shape().to_vec(),
        });
    }
    Ok(())
}

/// `ln(clamp(x))`.
pub(crate) fn log_clamped(tape: &mut Tape, x: Var) -> Result<Var> {
    let c = tape.clamp(x, EPS_NUM, 1.0)?;
    tape.log(c)
}

/// `1 - x`.
pub(crate) fn one_minus(tape: &mut Tape, x: Var) -> Result<Var> {
    let n = tape.neg(x)?;
    tape.add_scalar(n, 1.0)
}

/// Numerically stable `ln(1 + e^x)`.
pub(crate) fn softplus(tape: &mut Tape, x: Var) -> Result<Var> {
    let r = tape.relu(x)?;
    let a = tape.abs(x)?;
    let na = tape.neg(a)?;
    let e = tape.exp(na)?;
    let e1 = tape.add_scalar(e, 1.0)?;
    let l = tape.log(e1)?;
    tape.add(r, l)
}
