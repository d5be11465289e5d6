//! Threshold rates, F1 and ROC/AUC of a scored set. A sample is predicted
//! positive when its score is at least the threshold.

use std::io::Write;

use crate::error::{invalid, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct ScoredSet {
    pub positive: Vec<f64>,
    pub negative: Vec<f64>,
}

impl ScoredSet {
    pub fn new(positive: Vec<f64>, negative: Vec<f64>) -> Result<Self> {
        if positive.is_empty() || negative.is_empty() {
            return Err(invalid("scores", "both classes need at least one score"));
        }
        if positive.iter().chain(&negative).any(|s| s.is_nan()) {
            return Err(invalid("scores", "NaN score"));
        }
        Ok(Self { positive, negative })
    }

    /// Split `(score, label)` pairs.
    pub fn from_labeled(items: impl IntoIterator<Item = (f64, bool)>) -> Result<Self> {
        let (mut p, mut n) = (Vec::new(), Vec::new());
        for (s, y) in items {
            if y {
                p.push(s)
            } else {
                n.push(s)
            }
        }
        Self::new(p, n)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rates {
    /// Positives scored at or above the threshold.
    pub true_pos: usize,
    pub false_neg: usize,
    pub false_pos: usize,
    pub true_neg: usize,
    pub recall: f64,
    pub false_pos_rate: f64,
    /// 1 when nothing is predicted positive; see `no_predictions`.
    pub precision: f64,
    pub no_predictions: bool,
}

pub fn rates(s: &ScoredSet, threshold: f64) -> Rates {
    let tp = s.positive.iter().filter(|&&v| v >= threshold).count();
    let fp = s.negative.iter().filter(|&&v| v >= threshold).count();
    let (np, nn) = (s.positive.len(), s.negative.len());
    let predicted = tp + fp;
    Rates {
        true_pos: tp,
        false_neg: np - tp,
        false_pos: fp,
        true_neg: nn - fp,
        recall: tp as f64 / np as f64,
        false_pos_rate: fp as f64 / nn as f64,
        precision: if predicted == 0 { 1.0 } else { tp as f64 / predicted as f64 },
        no_predictions: predicted == 0,
    }
}

/// `2 t / (t + alpha f + 1)` with `alpha = N- / N+`.
pub fn f1(s: &ScoredSet, threshold: f64) -> f64 {
    let r = rates(s, threshold);
    let alpha = s.negative.len() as f64 / s.positive.len() as f64;
    2.0 * r.recall / (r.recall + alpha * r.false_pos_rate + 1.0)
}

/// `2 P R / (P + R)`, 0 when both vanish.
pub fn f1_from_counts(r: &Rates) -> f64 {
    let (p, rc) = (r.precision, r.recall);
    if p + rc == 0.0 {
        0.0
    } else {
        2.0 * p * rc / (p + rc)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TiePolicy {
    /// Tied pairs count one half, matching the trapezoid area.
    #[default]
    Half,
    /// Tied pairs count fully, as `s_n >= s_m`.
    Full,
}

/// Fraction of (positive, negative) pairs ranked correctly.
pub fn auc_exact(s: &ScoredSet, ties: TiePolicy) -> f64 {
    let tie = match ties {
        TiePolicy::Half => 0.5,
        TiePolicy::Full => 1.0,
    };
    let mut wins = 0.0;
    for &p in &s.positive {
        for &n in &s.negative {
            if p > n {
                wins += 1.0;
            } else if p == n {
                wins += tie;
            }
        }
    }
    wins / (s.positive.len() * s.negative.len()) as f64
}

/// ROC points `(fpr, recall)` from the strictest threshold (nothing
/// positive) down through every distinct score; ends at `(1, 1)`.
pub fn roc_points(s: &ScoredSet) -> Vec<(f64, f64)> {
    let mut thresholds: Vec<f64> = s.positive.iter().chain(&s.negative).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for th in thresholds {
        let r = rates(s, th);
        pts.push((r.false_pos_rate, r.recall));
    }
    pts
}

/// Trapezoid area under [`roc_points`].
pub fn auc_trapezoid(s: &ScoredSet) -> f64 {
    roc_points(s)
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * 0.5 * (w[1].1 + w[0].1))
        .sum()
}

pub fn write_roc_csv<W: Write>(mut w: W, points: &[(f64, f64)]) -> std::io::Result<()> {
    writeln!(w, "false_positive_rate,true_positive_rate")?;
    for (f, t) in points {
        writeln!(w, "{f:.12},{t:.12}")?;
    }
    Ok(())
}
