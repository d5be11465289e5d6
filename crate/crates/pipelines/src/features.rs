//! Frame feature helpers: log spectra, context stacking and per-dimension
//! standardization.

use acoustic_core::Tensor;

use crate::error::{invalid, Result};

/// Floor added before taking logarithms of powers.
pub const LOG_FLOOR: f64 = 1e-10;

/// `[T][K]` grid as a `[K, T]` tensor (one column per frame).
pub fn columns(grid: &[Vec<f64>]) -> Result<Tensor> {
    let t_count = grid.len();
    let k = grid.first().map_or(0, Vec::len);
    if t_count == 0 || k == 0 || grid.iter().any(|r| r.len() != k) {
        return Err(invalid("features", "empty or ragged grid"));
    }
    let mut data = vec![0.0; k * t_count];
    for (t, row) in grid.iter().enumerate() {
        for (i, &v) in row.iter().enumerate() {
            data[i * t_count + t] = v;
        }
    }
    Ok(Tensor::matrix(k, t_count, data)?)
}

/// `[K, T]` tensor back to a `[T][K]` grid.
pub fn grid(t: &Tensor) -> Vec<Vec<f64>> {
    (0..t.cols()).map(|c| t.col(c)).collect()
}

pub fn log_power(power: &[Vec<f64>]) -> Vec<Vec<f64>> {
    power
        .iter()
        .map(|r| r.iter().map(|p| (p + LOG_FLOOR).ln()).collect())
        .collect()
}

/// Concatenate frames `t - q ..= t + q` for every `t`, repeating the edge
/// frames, giving `[T][(2q + 1) K]`.
pub fn stack_context(frames: &[Vec<f64>], q: usize) -> Vec<Vec<f64>> {
    let last = frames.len().saturating_sub(1) as isize;
    (0..frames.len())
        .map(|t| {
            (-(q as isize)..=q as isize)
                .flat_map(|d| frames[(t as isize + d).clamp(0, last) as usize].iter().copied())
                .collect()
        })
        .collect()
}

/// Per-row affine map to zero mean and unit variance over training columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    /// Statistics over every column of every `[D, T]` tensor.
    pub fn fit<'a>(parts: impl IntoIterator<Item = &'a Tensor>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut n = 0usize;
        for t in parts {
            if sum.is_empty() {
                sum = vec![0.0; t.rows()];
                sq = vec![0.0; t.rows()];
            }
            if t.rows() != sum.len() {
                return Err(invalid("standardize", "feature dimensions differ"));
            }
            for r in 0..t.rows() {
                for &v in t.row(r) {
                    sum[r] += v;
                    sq[r] += v * v;
                }
            }
            n += t.cols();
        }
        if n == 0 {
            return Err(invalid("standardize", "no frames"));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let std = sq
            .iter()
            .zip(&mean)
            .map(|(s, m)| (s / n as f64 - m * m).max(0.0).sqrt().max(1e-6))
            .collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, t: &Tensor) -> Result<Tensor> {
        if t.rows() != self.mean.len() {
            return Err(invalid("standardize", "feature dimension mismatch"));
        }
        let c = t.cols();
        let mut out = t.clone();
        for (i, v) in out.data_mut().iter_mut().enumerate() {
            let r = i / c;
            *v = (*v - self.mean[r]) / self.std[r];
        }
        Ok(out)
    }
}

/// Concatenate `[D, T_i]` tensors along columns.
pub fn hcat(parts: &[&Tensor]) -> Result<Tensor> {
    let d = parts.first().map_or(0, |t| t.rows());
    if d == 0 || parts.iter().any(|t| t.rows() != d) {
        return Err(invalid("features", "cannot concatenate"));
    }
    let total: usize = parts.iter().map(|t| t.cols()).sum();
    let mut data = vec![0.0; d * total];
    let mut off = 0;
    for t in parts {
        for r in 0..d {
            data[r * total + off..r * total + off + t.cols()].copy_from_slice(t.row(r));
        }
        off += t.cols();
    }
    Ok(Tensor::matrix(d, total, data)?)
}

/// Columns `idx` of a `[D, N]` tensor.
pub fn select_columns(t: &Tensor, idx: &[usize]) -> Tensor {
    let (d, n) = (t.rows(), t.cols());
    let mut data = Vec::with_capacity(d * idx.len());
    for r in 0..d {
        let row = &t.data()[r * n..(r + 1) * n];
        data.extend(idx.iter().map(|&c| row[c]));
    }
    Tensor::matrix(d, idx.len(), data).expect("consistent shape")
}
