//! Per-bin gains: the Wiener gain and ideal ratio masks.

use crate::error::{invalid, Result};

/// `phi_s / (phi_s + phi_v)`, equivalently `iSNR / (1 + iSNR)`. Defined as
/// 0 when both powers vanish.
pub fn wiener_gain(signal_power: f64, noise_power: f64) -> f64 {
    let total = signal_power + noise_power;
    if total <= 0.0 {
        0.0
    } else {
        signal_power / total
    }
}

/// Gain as a function of the a-priori SNR (linear, not dB).
pub fn wiener_from_snr(snr: f64) -> f64 {
    if snr.is_infinite() {
        1.0
    } else {
        snr / (1.0 + snr)
    }
}

/// Wiener gains over a `[T, K]` grid.
pub fn wiener_mask(signal: &[Vec<f64>], noise: &[Vec<f64>]) -> Result<Vec<Vec<f64>>> {
    if signal.len() != noise.len() || signal.iter().zip(noise).any(|(a, b)| a.len() != b.len()) {
        return Err(invalid("wiener_mask", "grids differ in shape"));
    }
    Ok(signal
        .iter()
        .zip(noise)
        .map(|(s, v)| s.iter().zip(v).map(|(&a, &b)| wiener_gain(a, b)).collect())
        .collect())
}

/// Ideal ratio masks `|s_j|^2 / (eps0 + sum_i |s_i|^2)` from per-source
/// power grids `[J][T][K]`. A zero denominator yields 0.
pub fn ideal_masks(powers: &[Vec<Vec<f64>>], eps0: f64) -> Result<Vec<Vec<Vec<f64>>>> {
    let first = powers
        .first()
        .ok_or_else(|| invalid("ideal_masks", "no sources"))?;
    if eps0 < 0.0 {
        return Err(invalid("ideal_masks", "eps0 must be nonnegative"));
    }
    for p in powers {
        if p.len() != first.len() || p.iter().zip(first).any(|(a, b)| a.len() != b.len()) {
            return Err(invalid("ideal_masks", "sources differ in shape"));
        }
        if p.iter().flatten().any(|&v| v < 0.0) {
            return Err(invalid("ideal_masks", "powers must be nonnegative"));
        }
    }
    let mut masks = powers.to_vec();
    for t in 0..first.len() {
        for k in 0..first[t].len() {
            let den = eps0 + powers.iter().map(|p| p[t][k]).sum::<f64>();
            for (m, p) in masks.iter_mut().zip(powers) {
                m[t][k] = if den > 0.0 { p[t][k] / den } else { 0.0 };
            }
        }
    }
    Ok(masks)
}
