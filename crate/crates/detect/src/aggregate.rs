use crate::error::{invalid, Result};

/// Map from frame probabilities of one class to a clip probability.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Aggregation {
    Max,
    Mean,
    /// Mean of the `n` largest frames.
    TopN(usize),
    /// Sorted frames weighted by `lambda^i (1 - lambda) / (1 - lambda^T)`,
    /// largest first.
    ExpSorted(f64),
    /// Frames weighted by `softmax(tau * yhat)`.
    SoftmaxWeighted(f64),
    /// `sum yhat^2 / sum yhat`, 0 for an all-zero clip.
    LinearSoftmax,
}

fn sorted_desc(probs: &[f64]) -> Vec<f64> {
    let mut v = probs.to_vec();
    // Stable sort keeps earlier frames first among equal values.
    v.sort_by(|a, b| b.total_cmp(a));
    v
}

pub fn aggregate(probs: &[f64], method: Aggregation) -> Result<f64> {
    let t = probs.len();
    if t == 0 {
        return Err(invalid("aggregate", "no frames"));
    }
    if probs.iter().any(|p| !p.is_finite()) {
        return Err(invalid("aggregate", "non-finite probability"));
    }
    Ok(match method {
        Aggregation::Max => probs.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        Aggregation::Mean => probs.iter().sum::<f64>() / t as f64,
        Aggregation::TopN(n) => {
            if n == 0 || n > t {
                return Err(invalid("aggregate", format!("top-n {n} not in 1..={t}")));
            }
            sorted_desc(probs)[..n].iter().sum::<f64>() / n as f64
        }
        Aggregation::ExpSorted(lambda) => {
            if !(lambda > 0.0 && lambda < 1.0) {
                return Err(invalid("aggregate", "lambda must lie in (0, 1)"));
            }
            let norm = (1.0 - lambda) / (1.0 - lambda.powi(t as i32));
            let mut w = norm;
            let mut acc = 0.0;
            for v in sorted_desc(probs) {
                acc += w * v;
                w *= lambda;
            }
            acc
        }
        Aggregation::SoftmaxWeighted(tau) => {
            if !(tau >= 0.0) || !tau.is_finite() {
                return Err(invalid("aggregate", "tau must be finite and nonnegative"));
            }
            let top = probs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let w: Vec<f64> = probs.iter().map(|p| (tau * (p - top)).exp()).collect();
            let z: f64 = w.iter().sum();
            w.iter().zip(probs).map(|(a, p)| a * p).sum::<f64>() / z
        }
        Aggregation::LinearSoftmax => {
            let den: f64 = probs.iter().sum();
            if den == 0.0 {
                0.0
            } else {
                probs.iter().map(|p| p * p).sum::<f64>() / den
            }
        }
    })
}
