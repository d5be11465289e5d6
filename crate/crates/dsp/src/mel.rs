//! Mel filterbank energies and cepstral coefficients.

use std::f64::consts::PI;

use crate::error::{invalid, Result};

/// Cepstral coefficients kept when the caller has no preference.
pub const DEFAULT_MFCC: usize = 20;

/// Floor applied to filter energies before the logarithm.
pub const LOG_FLOOR: f64 = 1e-12;

pub fn hz_to_mel(f: f64) -> f64 {
    1125.0 * (1.0 + f / 700.0).ln()
}

pub fn mel_to_hz(m: f64) -> f64 {
    700.0 * ((m / 1125.0).exp() - 1.0)
}

/// Triangular filters with centers uniformly spaced in Mel from 0 Hz to
/// Nyquist, evaluated on the `K` bins of a one-sided spectrum.
#[derive(Clone, Debug, PartialEq)]
pub struct MelBank {
    /// Filter edges and centers in Hz; filter `f` spans `edges[f]..edges[f + 2]`.
    pub edges: Vec<f64>,
    /// `weights[f][k]`.
    pub weights: Vec<Vec<f64>>,
    pub sample_rate: u32,
}

impl MelBank {
    pub fn new(filters: usize, bins: usize, sample_rate: u32) -> Result<Self> {
        if filters < 2 {
            return Err(invalid("mel_bank", "need at least two filters"));
        }
        if bins < 2 || sample_rate == 0 {
            return Err(invalid("mel_bank", "need at least two bins and a positive rate"));
        }
        let nyquist = f64::from(sample_rate) / 2.0;
        let top = hz_to_mel(nyquist);
        let edges: Vec<f64> = (0..filters + 2)
            .map(|i| mel_to_hz(top * i as f64 / (filters + 1) as f64))
            .collect();
        let mut bank = Self {
            edges,
            weights: Vec::new(),
            sample_rate,
        };
        let bin_hz = nyquist / (bins - 1) as f64;
        bank.weights = (0..filters)
            .map(|f| (0..bins).map(|k| bank.response(f, k as f64 * bin_hz)).collect())
            .collect();
        Ok(bank)
    }

    pub fn filters(&self) -> usize {
        self.edges.len() - 2
    }

    pub fn bins(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Continuous response of filter `f` at `hz`: rises linearly from the
    /// lower edge to 1 at the center and falls to 0 at the upper edge.
    pub fn response(&self, f: usize, hz: f64) -> f64 {
        let (lo, mid, hi) = (self.edges[f], self.edges[f + 1], self.edges[f + 2]);
        if hz <= lo || hz >= hi {
            0.0
        } else if hz <= mid {
            (hz - lo) / (mid - lo)
        } else {
            (hi - hz) / (hi - mid)
        }
    }

    /// Filter energies `[T, F]` from power frames `[T, K]`.
    pub fn apply(&self, power: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
        let k = self.bins();
        if power.iter().any(|fr| fr.len() != k) {
            return Err(invalid("mel_spectrum", format!("frames must have {k} bins")));
        }
        Ok(power
            .iter()
            .map(|fr| {
                self.weights
                    .iter()
                    .map(|w| w.iter().zip(fr).map(|(a, b)| a * b).sum())
                    .collect()
            })
            .collect())
    }
}

pub fn log_mel(bank: &MelBank, power: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    Ok(bank
        .apply(power)?
        .into_iter()
        .map(|fr| fr.into_iter().map(|e| e.max(LOG_FLOOR).ln()).collect())
        .collect())
}

/// First `count` type-II cosine coefficients
/// `c_l = sum_f e_f cos(pi l (f + 1/2) / F)` of one log-Mel vector.
pub fn cepstrum(log_energies: &[f64], count: usize) -> Result<Vec<f64>> {
    let f = log_energies.len();
    if count == 0 || count > f {
        return Err(invalid("mfcc", format!("coefficient count {count} not in 1..={f}")));
    }
    Ok((0..count)
        .map(|l| {
            log_energies
                .iter()
                .enumerate()
                .map(|(i, e)| e * (PI * l as f64 * (i as f64 + 0.5) / f as f64).cos())
                .sum()
        })
        .collect())
}

/// MFCC frames `[T, count]` from power frames.
pub fn mfcc(bank: &MelBank, power: &[Vec<f64>], count: usize) -> Result<Vec<Vec<f64>>> {
    log_mel(bank, power)?
        .iter()
        .map(|fr| cepstrum(fr, count))
        .collect()
}
