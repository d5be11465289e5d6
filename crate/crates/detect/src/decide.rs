//! Frame decisions `p_t = (p_t^c OR p_t^l) AND p^g`.
//!
//! * `p^g`: the clip probability reaches the global threshold.
//! * `p_t^l`: the frame reaches the high threshold.
//! * `p_t^c`: the frame lies in a maximal run of frames at or above the low
//!   threshold whose length reaches the minimum duration. Frames above the
//!   high threshold belong to such runs too, so a sustained event with a few
//!   confident frames is not split in pieces.

use std::io::Write;

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Thresholds {
    pub global: f64,
    pub low: f64,
    pub high: f64,
    /// Minimum run length in frames.
    pub min_frames: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            global: 0.5,
            low: 0.2,
            high: 0.75,
            min_frames: 5,
        }
    }
}

impl Thresholds {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| (0.0..=1.0).contains(&v);
        if !(unit(self.global) && unit(self.low) && unit(self.high)) {
            return Err(invalid("thresholds", "thresholds must lie in [0, 1]"));
        }
        if self.low > self.high {
            return Err(invalid("thresholds", "low threshold exceeds high threshold"));
        }
        Ok(())
    }
}

pub fn decide(probs: &[f64], th: &Thresholds, clip: f64) -> Result<Vec<bool>> {
    th.validate()?;
    let t_count = probs.len();
    if clip < th.global {
        return Ok(vec![false; t_count]);
    }
    let mut out: Vec<bool> = probs.iter().map(|&p| p >= th.high).collect();
    let mut t = 0;
    while t < t_count {
        if probs[t] < th.low {
            t += 1;
            continue;
        }
        let start = t;
        while t < t_count && probs[t] >= th.low {
            t += 1;
        }
        if t - start >= th.min_frames {
            out[start..t].iter_mut().for_each(|v| *v = true);
        }
    }
    Ok(out)
}

/// Decisions for frame probabilities `[T][L]` and clip scores `[L]`.
pub fn decide_matrix(probs: &[Vec<f64>], th: &Thresholds, clip: &[f64]) -> Result<Vec<Vec<bool>>> {
    let l = clip.len();
    if probs.iter().any(|fr| fr.len() != l) {
        return Err(invalid("decide", format!("every frame needs {l} classes")));
    }
    let per_class = (0..l)
        .map(|c| {
            let col: Vec<f64> = probs.iter().map(|fr| fr[c]).collect();
            decide(&col, th, clip[c])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((0..probs.len())
        .map(|t| (0..l).map(|c| per_class[c][t]).collect())
        .collect())
}

/// Rows `frame,class,probability,decision`.
pub fn write_decisions_csv<W: Write>(
    mut w: W,
    probs: &[Vec<f64>],
    decisions: &[Vec<bool>],
) -> std::io::Result<()> {
    writeln!(w, "frame,class,probability,decision")?;
    for (t, (p, d)) in probs.iter().zip(decisions).enumerate() {
        for (c, (pv, dv)) in p.iter().zip(d).enumerate() {
            writeln!(w, "{t},{c},{pv:.9},{}", u8::from(*dv))?;
        }
    }
    Ok(())
}
