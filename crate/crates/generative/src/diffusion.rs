//! Variational diffusion: forward noising, Gaussian posterior reverse steps
//! and the weighted reconstruction objective.

use acoustic_core::rng::normal;
use acoustic_core::tape::{Tape, Var};
use acoustic_core::Tensor;
use rand::Rng;

use crate::error::{invalid, Result};

/// Shape of the per-step retention `alpha_t` over `t = 1..T`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AlphaCurve {
    /// Linear interpolation from `first` at `t = 1` to `last` at `t = T`.
    Linear { first: f64, last: f64 },
    Constant(f64),
}

impl AlphaCurve {
    /// Reaches `alpha_bar_T < 1e-4` at `T = 1000`.
    pub const DEFAULT: AlphaCurve = AlphaCurve::Linear {
        first: 0.9999,
        last: 0.98,
    };
}

/// Per-step quantities, indexed by `t - 1`.
#[derive(Clone, Debug, PartialEq)]
pub struct DiffusionSchedule {
    pub alpha: Vec<f64>,
    pub alpha_bar: Vec<f64>,
    /// Posterior variance of `x_{t-1}` given `x_t` and `x_0`.
    pub sigma2: Vec<f64>,
    /// Weight of step `t` in the objective. Zero for `t = 1`, which the
    /// objective does not sum over, and for steps with no posterior spread.
    pub rho: Vec<f64>,
}

impl DiffusionSchedule {
    pub fn new(steps: usize, curve: AlphaCurve) -> Result<Self> {
        if steps < 2 {
            return Err(invalid("schedule", "need at least two steps"));
        }
        let alpha: Vec<f64> = (0..steps)
            .map(|i| match curve {
                AlphaCurve::Linear { first, last } => first + (last - first) * i as f64 / (steps - 1) as f64,
                AlphaCurve::Constant(a) => a,
            })
            .collect();
        if alpha.iter().any(|&a| !(a > 0.0 && a <= 1.0)) {
            return Err(invalid("schedule", "alpha must lie in (0, 1]"));
        }
        let mut alpha_bar = Vec::with_capacity(steps);
        let mut acc = 1.0;
        for &a in &alpha {
            acc *= a;
            alpha_bar.push(acc);
        }
        let mut sigma2 = Vec::with_capacity(steps);
        let mut rho = Vec::with_capacity(steps);
        for t in 1..=steps {
            let a = alpha[t - 1];
            let ab = alpha_bar[t - 1];
            let prev = if t == 1 { 1.0 } else { alpha_bar[t - 2] };
            let s2 = if 1.0 - ab == 0.0 {
                0.0
            } else {
                (1.0 - a) * (1.0 - prev) / (1.0 - ab)
            };
            sigma2.push(s2);
            let r = if t == 1 || s2 == 0.0 {
                0.0
            } else {
                (1.0 / (2.0 * s2)) * prev * (1.0 - a).powi(2) / (1.0 - ab).powi(2)
            };
            rho.push(r);
        }
        Ok(Self {
            alpha,
            alpha_bar,
            sigma2,
            rho,
        })
    }

    pub fn steps(&self) -> usize {
        self.alpha.len()
    }

    fn check(&self, t: usize) -> Result<()> {
        if t == 0 || t > self.steps() {
            return Err(invalid("diffusion", format!("step {t} outside 1..={}", self.steps())));
        }
        Ok(())
    }

    /// `alpha_bar_{t-1}`, with `alpha_bar_0 = 1`.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        if t <= 1 {
            1.0
        } else {
            self.alpha_bar[t - 2]
        }
    }

    /// `sqrt(alpha_bar_t) x0 + sqrt(1 - alpha_bar_t) noise`.
    pub fn q_sample_with(&self, x0: &[f64], t: usize, noise: &[f64]) -> Result<Vec<f64>> {
        self.check(t)?;
        if noise.len() != x0.len() {
            return Err(invalid("q_sample", "noise length differs from the sample"));
        }
        let ab = self.alpha_bar[t - 1];
        let (m, s) = (ab.sqrt(), (1.0 - ab).sqrt());
        Ok(x0.iter().zip(noise).map(|(x, e)| m * x + s * e).collect())
    }

    pub fn q_sample<R: Rng + ?Sized>(&self, x0: &[f64], t: usize, rng: &mut R) -> Result<Vec<f64>> {
        let noise: Vec<f64> = x0.iter().map(|_| normal(rng)).collect();
        self.q_sample_with(x0, t, &noise)
    }

    /// One forward transition `x_{t-1} -> x_t`.
    pub fn forward_step<R: Rng + ?Sized>(&self, x_prev: &[f64], t: usize, rng: &mut R) -> Result<Vec<f64>> {
        self.check(t)?;
        let a = self.alpha[t - 1];
        Ok(x_prev.iter().map(|x| a.sqrt() * x + (1.0 - a).sqrt() * normal(rng)).collect())
    }

    /// Mean and variance of `x_{t-1}` given `x_t` and an estimate of `x_0`.
    pub fn posterior(&self, x_t: &[f64], x0: &[f64], t: usize) -> Result<(Vec<f64>, f64)> {
        self.check(t)?;
        if x_t.len() != x0.len() {
            return Err(invalid("posterior", "x_t and x0 differ in length"));
        }
        let a = self.alpha[t - 1];
        let ab = self.alpha_bar[t - 1];
        let prev = self.alpha_bar_prev(t);
        if 1.0 - ab == 0.0 {
            return Ok((x_t.to_vec(), 0.0));
        }
        let ct = a.sqrt() * (1.0 - prev) / (1.0 - ab);
        let c0 = prev.sqrt() * (1.0 - a) / (1.0 - ab);
        let mean = x_t.iter().zip(x0).map(|(xt, x)| ct * xt + c0 * x).collect();
        Ok((mean, self.sigma2[t - 1]))
    }

    /// Sample `x_{t-1}`; at `t = 1` the mean is returned without noise.
    pub fn posterior_step<R: Rng + ?Sized>(
        &self,
        x_t: &[f64],
        x0: &[f64],
        t: usize,
        rng: &mut R,
    ) -> Result<Vec<f64>> {
        let (mean, var) = self.posterior(x_t, x0, t)?;
        if t == 1 || var == 0.0 {
            return Ok(mean);
        }
        let s = var.sqrt();
        Ok(mean.into_iter().map(|m| m + s * normal(rng)).collect())
    }
}

/// How steps are weighted in the training objective.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum StepWeighting {
    /// `rho_t`, from the evidence lower bound.
    #[default]
    Elbo,
    /// Every step weighted one.
    Uniform,
}

/// One noised training example.
#[derive(Clone, Debug, PartialEq)]
pub struct NoisedBatch {
    /// `[D, B]` noised inputs.
    pub x_t: Tensor,
    /// Step per column.
    pub steps: Vec<usize>,
    /// `[1, B]` weight per column.
    pub weights: Tensor,
}

/// Draw `t` uniformly from `2..=T` and noise per column of `x0` `[D, B]`.
pub fn noise_batch<R: Rng + ?Sized>(
    schedule: &DiffusionSchedule,
    x0: &Tensor,
    weighting: StepWeighting,
    rng: &mut R,
) -> Result<NoisedBatch> {
    let steps: Vec<usize> = (0..x0.cols())
        .map(|_| rng.random_range(2..=schedule.steps()))
        .collect();
    let noise: Vec<Vec<f64>> = (0..x0.cols())
        .map(|_| (0..x0.rows()).map(|_| normal(rng)).collect())
        .collect();
    noise_batch_with(schedule, x0, &steps, &noise, weighting)
}

/// Deterministic variant with explicit steps and per-column noise.
pub fn noise_batch_with(
    schedule: &DiffusionSchedule,
    x0: &Tensor,
    steps: &[usize],
    noise: &[Vec<f64>],
    weighting: StepWeighting,
) -> Result<NoisedBatch> {
    let (d, b) = (x0.rows(), x0.cols());
    if steps.len() != b || noise.len() != b {
        return Err(invalid("diffusion loss", "one step and noise vector per column"));
    }
    let mut x_t = Tensor::zeros(vec![d, b]);
    let mut weights = Vec::with_capacity(b);
    let count = (schedule.steps() - 1) as f64;
    for (j, (&t, e)) in steps.iter().zip(noise).enumerate() {
        if t < 2 {
            return Err(invalid("diffusion loss", "steps are drawn from 2..=T"));
        }
        let col = x0.col(j);
        let xt = schedule.q_sample_with(&col, t, e)?;
        for (i, v) in xt.into_iter().enumerate() {
            x_t.set(i, j, v);
        }
        // Uniform draws over T - 1 steps estimate the sum with this factor.
        weights.push(match weighting {
            StepWeighting::Elbo => count * schedule.rho[t - 1],
            StepWeighting::Uniform => 1.0,
        });
    }
    Ok(NoisedBatch {
        x_t,
        steps: steps.to_vec(),
        weights: Tensor::matrix(1, b, weights)?,
    })
}

/// `[1, B]` time feature `t / T`.
pub fn time_feature(steps: &[usize], total: usize) -> Result<Tensor> {
    Ok(Tensor::matrix(1, steps.len(), steps.iter().map(|&t| t as f64 / total as f64).collect())?)
}

/// Batch mean of `w_t ||prediction - x0||^2` for predictions `[D, B]`.
pub fn diffusion_train_loss(tape: &mut Tape, prediction: Var, x0: Var, weights: Var) -> Result<Var> {
    let diff = tape.sub(prediction, x0)?;
    let sq = tape.square(diff)?;
    let per = tape.sum_axis(sq, 0)?;
    let weighted = tape.mul(per, weights)?;
    Ok(tape.mean(weighted)?)
}
