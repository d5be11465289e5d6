//! Analysis windows satisfying the constant overlap-add condition
//! `sum_i psi(t - i*hop) = 1`.

use std::f64::consts::PI;

use crate::error::{invalid, DspError, Result};

/// Largest tolerated deviation of the overlap sum from one.
pub const COLA_TOL: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WindowShape {
    Rect,
    Hann,
}

/// Window length, hop and window samples of a validated framing.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameConfig {
    window_len: usize,
    hop: usize,
    window: Vec<f64>,
}

fn periodic_hann(n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos())
        .collect()
}

/// Overlap sums `(A psi)_r = sum_i psi(r + i*hop)` for each phase `r < hop`.
pub fn overlap_sums(window: &[f64], hop: usize) -> Vec<f64> {
    let mut sums = vec![0.0; hop];
    for (n, &w) in window.iter().enumerate() {
        sums[n % hop] += w;
    }
    sums
}

/// `max_r |(A psi)_r - 1|`.
pub fn cola_residual(window: &[f64], hop: usize) -> f64 {
    overlap_sums(window, hop)
        .iter()
        .map(|s| (s - 1.0).abs())
        .fold(0.0, f64::max)
}

fn check_lengths(window_len: usize, hop: usize) -> Result<()> {
    if hop == 0 || window_len == 0 {
        return Err(invalid("frame", "window length and hop must be positive"));
    }
    if hop > window_len {
        // Phases with no window sample can never sum to one.
        let empty = (hop - window_len) as f64;
        return Err(DspError::Infeasible {
            residual: empty.sqrt(),
        });
    }
    if window_len % hop != 0 {
        return Err(invalid(
            "frame",
            format!("window length {window_len} is not a multiple of hop {hop}"),
        ));
    }
    Ok(())
}

/// Window of length `window_len` meeting COLA for `hop`.
///
/// A Hann base that is already COLA after scaling by `2*hop/window_len` is
/// returned scaled. Otherwise the minimum-norm correction of the base onto
/// `A psi = 1` is used: each phase receives `(1 - sum)/Q` per sample, with
/// `Q = window_len / hop`. When the hop equals the window length this forces
/// the rectangular window.
pub fn solve_cola_window(window_len: usize, hop: usize, base: WindowShape) -> Result<Vec<f64>> {
    check_lengths(window_len, hop)?;
    let q = (window_len / hop) as f64;
    let base_window = match base {
        WindowShape::Rect => vec![1.0 / q; window_len],
        WindowShape::Hann => {
            let scaled: Vec<f64> = periodic_hann(window_len)
                .into_iter()
                .map(|v| v * 2.0 / q)
                .collect();
            if cola_residual(&scaled, hop) < COLA_TOL {
                return Ok(scaled);
            }
            scaled
        }
    };
    let sums = overlap_sums(&base_window, hop);
    let psi: Vec<f64> = base_window
        .iter()
        .enumerate()
        .map(|(n, &w)| w + (1.0 - sums[n % hop]) / q)
        .collect();
    let residual = cola_residual(&psi, hop);
    if residual >= COLA_TOL {
        return Err(DspError::Infeasible { residual });
    }
    Ok(psi)
}

impl FrameConfig {
    /// Validate a caller-supplied window.
    pub fn new(window_len: usize, hop: usize, window: Vec<f64>) -> Result<Self> {
        check_lengths(window_len, hop)?;
        if window.len() != window_len {
            return Err(invalid(
                "frame",
                format!("window has {} samples, expected {window_len}", window.len()),
            ));
        }
        if window.iter().any(|&w| !w.is_finite() || w < 0.0) {
            return Err(invalid("frame", "window samples must be finite and nonnegative"));
        }
        let residual = cola_residual(&window, hop);
        if residual >= COLA_TOL {
            return Err(invalid(
                "frame",
                format!("window violates COLA by {residual:.3e}"),
            ));
        }
        Ok(Self {
            window_len,
            hop,
            window,
        })
    }

    pub fn solve(window_len: usize, hop: usize, base: WindowShape) -> Result<Self> {
        let w = solve_cola_window(window_len, hop, base)?;
        Self::new(window_len, hop, w)
    }

    pub fn window_len(&self) -> usize {
        self.window_len
    }

    pub fn hop(&self) -> usize {
        self.hop
    }

    pub fn window(&self) -> &[f64] {
        &self.window
    }

    /// Overlap factor `window_len / hop`.
    pub fn overlap(&self) -> usize {
        self.window_len / self.hop
    }

    /// Retained bins of a one-sided spectrum.
    pub fn bins(&self) -> usize {
        self.window_len / 2 + 1
    }

    /// Number of whole frames that fit in `len` samples.
    pub fn frame_count(&self, len: usize) -> Result<usize> {
        if len < self.window_len {
            return Err(DspError::TooShort {
                len,
                window: self.window_len,
            });
        }
        Ok((len - self.window_len) / self.hop + 1)
    }

    /// Sample range covered by every overlapping frame for `frames` frames.
    pub fn interior(&self, frames: usize) -> std::ops::Range<usize> {
        (self.window_len - self.hop)..(frames * self.hop)
    }
}
