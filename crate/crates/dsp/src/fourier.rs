//! Full-length discrete Fourier transforms `X_k = sum_n x_n e^(-2 pi j k n / N)`.

use std::f64::consts::PI;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

/// Forward or inverse transform of one fixed size. Power-of-two sizes use
/// a fast transform, other sizes a direct `O(N^2)` sum.
pub struct Dft {
    n: usize,
    fast: Option<(Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>)>,
    twiddles: Vec<Complex64>,
}

impl std::fmt::Debug for Dft {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Dft").field("n", &self.n).finish()
    }
}

impl Dft {
    pub fn new(n: usize) -> Self {
        assert!(n > 0, "transform size must be positive");
        if n.is_power_of_two() {
            let mut planner = FftPlanner::new();
            let fwd = planner.plan_fft_forward(n);
            let inv = planner.plan_fft_inverse(n);
            Self {
                n,
                fast: Some((fwd, inv)),
                twiddles: Vec::new(),
            }
        } else {
            let twiddles = (0..n)
                .map(|i| Complex64::from_polar(1.0, -2.0 * PI * i as f64 / n as f64))
                .collect();
            Self {
                n,
                fast: None,
                twiddles,
            }
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    fn direct(&self, x: &[Complex64], sign: i64) -> Vec<Complex64> {
        let n = self.n;
        (0..n)
            .map(|k| {
                x.iter()
                    .enumerate()
                    .map(|(i, &v)| {
                        let idx = (k * i) % n;
                        let tw = if sign < 0 {
                            self.twiddles[idx]
                        } else {
                            self.twiddles[idx].conj()
                        };
                        v * tw
                    })
                    .sum()
            })
            .collect()
    }

    /// Unnormalized forward transform.
    pub fn forward(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        match &self.fast {
            Some((fwd, _)) => {
                let mut buf = x.to_vec();
                fwd.process(&mut buf);
                buf
            }
            None => self.direct(x, -1),
        }
    }

    pub fn forward_real(&self, x: &[f64]) -> Vec<Complex64> {
        let c: Vec<Complex64> = x.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        self.forward(&c)
    }

    /// Inverse transform including the `1/N` factor.
    pub fn inverse(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.n);
        let scale = 1.0 / self.n as f64;
        let mut out = match &self.fast {
            Some((_, inv)) => {
                let mut buf = x.to_vec();
                inv.process(&mut buf);
                buf
            }
            None => self.direct(x, 1),
        };
        for v in &mut out {
            *v *= scale;
        }
        out
    }

    /// Real signal from a one-sided spectrum of `N/2 + 1` bins, filling the
    /// upper half by conjugate symmetry. Imaginary parts of the DC and
    /// Nyquist bins are ignored.
    pub fn inverse_one_sided(&self, half: &[Complex64]) -> Vec<f64> {
        let n = self.n;
        assert_eq!(half.len(), n / 2 + 1);
        let mut full = vec![Complex64::new(0.0, 0.0); n];
        full[..half.len()].copy_from_slice(half);
        full[0].im = 0.0;
        if n % 2 == 0 {
            full[n / 2].im = 0.0;
        }
        for k in 1..n.div_ceil(2) {
            full[n - k] = half[k].conj();
        }
        self.inverse(&full).into_iter().map(|c| c.re).collect()
    }
}
