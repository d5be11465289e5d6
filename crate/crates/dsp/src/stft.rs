//! Framed analysis, per-bin filtering and overlap-add reconstruction.
//!
//! Frame `t` holds `x(t*hop + n) psi(n)` for `n < window_len`; the window is
//! applied once at analysis and synthesis is a plain overlap-add of the
//! inverse transforms.

use std::io::Write;

use acoustic_core::Tensor;
use num_complex::Complex64;

use crate::error::{invalid, Result};
use crate::fourier::Dft;
use crate::window::FrameConfig;

/// One-sided short-time spectrum, `frames[t][k]` for `t < T`, `k < K`.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub frames: Vec<Vec<Complex64>>,
    pub config: FrameConfig,
    pub sample_rate: u32,
    /// Length of the analysed signal.
    pub signal_len: usize,
}

/// Short-time transform of `x`.
pub fn stft(x: &[f64], config: &FrameConfig, sample_rate: u32) -> Result<Spectrogram> {
    let t_count = config.frame_count(x.len())?;
    let lw = config.window_len();
    let k = config.bins();
    let dft = Dft::new(lw);
    let psi = config.window();
    let frames = (0..t_count)
        .map(|t| {
            let start = t * config.hop();
            let seg: Vec<f64> = x[start..start + lw]
                .iter()
                .zip(psi)
                .map(|(a, w)| a * w)
                .collect();
            let mut spec = dft.forward_real(&seg);
            spec.truncate(k);
            spec
        })
        .collect();
    Ok(Spectrogram {
        frames,
        config: config.clone(),
        sample_rate,
        signal_len: x.len(),
    })
}

impl Spectrogram {
    pub fn frame_count(&self) -> usize {
        self.frames.len()
    }

    pub fn bins(&self) -> usize {
        self.config.bins()
    }

    /// Angular frequency of bin `k` in rad/s.
    pub fn omega(&self, k: usize) -> f64 {
        bin_omega(k, self.config.window_len(), self.sample_rate)
    }

    pub fn magnitude(&self) -> Vec<Vec<f64>> {
        self.map(|c| c.norm())
    }

    pub fn power(&self) -> Vec<Vec<f64>> {
        self.map(|c| c.norm_sqr())
    }

    fn map(&self, f: impl Fn(Complex64) -> f64) -> Vec<Vec<f64>> {
        self.frames
            .iter()
            .map(|fr| fr.iter().map(|&c| f(c)).collect())
            .collect()
    }

    /// Multiply every bin by a real gain `mask[t][k]`.
    pub fn apply_mask(&self, mask: &[Vec<f64>]) -> Result<Spectrogram> {
        self.check_grid(mask)?;
        let mut out = self.clone();
        for (fr, m) in out.frames.iter_mut().zip(mask) {
            for (c, &g) in fr.iter_mut().zip(m) {
                *c *= g;
            }
        }
        Ok(out)
    }

    pub fn check_grid(&self, grid: &[Vec<f64>]) -> Result<()> {
        let k = self.bins();
        if grid.len() != self.frame_count() || grid.iter().any(|r| r.len() != k) {
            return Err(invalid(
                "spectrogram",
                format!("expected {} x {k} values", self.frame_count()),
            ));
        }
        Ok(())
    }

    /// Magnitudes as a `[T, K]` tensor.
    pub fn magnitude_tensor(&self) -> Result<Tensor> {
        Ok(Tensor::from_rows(&self.magnitude())?)
    }

    /// Magnitude table with a `frame,bin_0,...` header.
    pub fn write_magnitude_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        let header: Vec<String> = (0..self.bins()).map(|k| format!("bin_{k}")).collect();
        writeln!(w, "frame,{}", header.join(","))?;
        for (t, row) in self.magnitude().iter().enumerate() {
            let vals: Vec<String> = row.iter().map(|v| format!("{v:.9e}")).collect();
            writeln!(w, "{t},{}", vals.join(","))?;
        }
        Ok(())
    }
}

/// `2 pi k rate / window_len`.
pub fn bin_omega(k: usize, window_len: usize, sample_rate: u32) -> f64 {
    2.0 * std::f64::consts::PI * k as f64 * f64::from(sample_rate) / window_len as f64
}

/// Overlap-add reconstruction, optionally after applying a real mask.
/// Samples outside the frames are zero; only the interior is exact.
pub fn istft(spec: &Spectrogram, mask: Option<&[Vec<f64>]>) -> Result<Vec<f64>> {
    let masked;
    let spec = match mask {
        Some(m) => {
            masked = spec.apply_mask(m)?;
            &masked
        }
        None => spec,
    };
    let lw = spec.config.window_len();
    let hop = spec.config.hop();
    let dft = Dft::new(lw);
    let mut out = vec![0.0; spec.signal_len];
    for (t, fr) in spec.frames.iter().enumerate() {
        let seg = dft.inverse_one_sided(fr);
        for (o, v) in out[t * hop..t * hop + lw].iter_mut().zip(seg) {
            *o += v;
        }
    }
    Ok(out)
}
