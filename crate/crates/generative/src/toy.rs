//! Desk-scale experiments: a 1-D adversarial toy and a 2-D cluster
//! diffusion toy.

use acoustic_core::layers::{Dense, Mlp};
use acoustic_core::rng::normal;
use acoustic_core::{Activation, Adam, AdamConfig, ParamStore, Tape, Tensor};
use rand::Rng;

use crate::adversarial::{gan_values, GeneratorObjective};
use crate::diffusion::{
    diffusion_train_loss, noise_batch, noise_batch_with, time_feature, AlphaCurve, DiffusionSchedule,
    StepWeighting,
};
use crate::error::{invalid, Result};

/// Affine generator against a small sigmoid discriminator, with 1-D
/// Gaussian data.
pub struct GanToy {
    pub data_mean: f64,
    pub data_std: f64,
    pub objective: GeneratorObjective,
    gen_store: ParamStore,
    generator: Dense,
    disc_store: ParamStore,
    discriminator: Mlp,
    gen_opt: Adam,
    disc_opt: Adam,
}

impl GanToy {
    pub fn new<R: Rng + ?Sized>(data_mean: f64, data_std: f64, objective: GeneratorObjective, rng: &mut R) -> Result<Self> {
        let mut gen_store = ParamStore::new();
        let generator = Dense::from_params(
            &mut gen_store,
            Tensor::matrix(1, 1, vec![1.0])?,
            Tensor::matrix(1, 1, vec![0.0])?,
            Activation::Identity,
        )?;
        let mut disc_store = ParamStore::new();
        let discriminator = Mlp::new(&mut disc_store, &[1, 16, 1], Activation::Tanh, Activation::Sigmoid, rng);
        let cfg = AdamConfig {
            lr: 0.02,
            ..AdamConfig::default()
        };
        Ok(Self {
            data_mean,
            data_std,
            objective,
            gen_store,
            generator,
            disc_store,
            discriminator,
            gen_opt: Adam::new(cfg)?,
            disc_opt: Adam::new(cfg)?,
        })
    }

    fn noise<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<Tensor> {
        Ok(Tensor::matrix(1, n, (0..n).map(|_| normal(rng)).collect())?)
    }

    /// Mean of `n` generated samples.
    pub fn generated_mean<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<f64> {
        let z = Self::noise(n, rng)?;
        let mut tape = Tape::new();
        let p = self.gen_store.bind(&mut tape)?;
        let zv = tape.leaf(z)?;
        let y = self.generator.forward(&mut tape, &p, zv)?;
        Ok(tape.value(y).mean())
    }

    /// One discriminator update followed by one generator update per batch.
    pub fn epoch<R: Rng + ?Sized>(&mut self, batches: usize, batch: usize, rng: &mut R) -> Result<()> {
        for _ in 0..batches {
            let real = Tensor::matrix(
                1,
                batch,
                (0..batch).map(|_| self.data_mean + self.data_std * normal(rng)).collect(),
            )?;
            let z = Self::noise(batch, rng)?;
            for side in [true, false] {
                let mut tape = Tape::new();
                let gp = self.gen_store.bind(&mut tape)?;
                let dp = self.disc_store.bind(&mut tape)?;
                let zv = tape.leaf(z.clone())?;
                let fake = self.generator.forward(&mut tape, &gp, zv)?;
                let rv = tape.leaf(real.clone())?;
                let d_real = self.discriminator.forward(&mut tape, &dp, rv)?;
                let d_fake = self.discriminator.forward(&mut tape, &dp, fake)?;
                let v = gan_values(&mut tape, d_real, d_fake, self.objective)?;
                if side {
                    let g = tape.backward(v.discriminator_loss)?;
                    self.disc_opt.step(self.disc_store.tensors_mut(), &dp.grads(&g))?;
                } else {
                    let g = tape.backward(v.generator_loss)?;
                    self.gen_opt.step(self.gen_store.tensors_mut(), &gp.grads(&g))?;
                }
            }
        }
        Ok(())
    }
}

/// Isotropic Gaussian clusters in the plane.
#[derive(Clone, Debug, PartialEq)]
pub struct ClusterToy {
    pub centers: Vec<[f64; 2]>,
    pub spread: f64,
}

impl Default for ClusterToy {
    fn default() -> Self {
        Self {
            centers: vec![[-1.5, 0.0], [1.5, 0.0]],
            spread: 0.2,
        }
    }
}

impl ClusterToy {
    /// `[2, n]` samples with uniformly chosen clusters.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Result<Tensor> {
        let mut data = vec![0.0; 2 * n];
        for j in 0..n {
            let c = self.centers[rng.random_range(0..self.centers.len())];
            data[j] = c[0] + self.spread * normal(rng);
            data[n + j] = c[1] + self.spread * normal(rng);
        }
        Ok(Tensor::matrix(2, n, data)?)
    }

    /// Distance from a point to its nearest center, in units of the spread.
    pub fn standardized_distance(&self, p: [f64; 2]) -> f64 {
        self.centers
            .iter()
            .map(|c| ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt())
            .fold(f64::INFINITY, f64::min)
            / self.spread
    }

    /// Fraction of the columns of `x` within `k` spreads of a center.
    pub fn fraction_within(&self, x: &Tensor, k: f64) -> f64 {
        let n = x.cols();
        let hits = (0..n)
            .filter(|&j| self.standardized_distance([x.at(0, j), x.at(1, j)]) <= k)
            .count();
        hits as f64 / n as f64
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DenoiserConfig {
    pub steps: usize,
    pub curve: AlphaCurve,
    pub hidden: usize,
    pub train_steps: usize,
    pub batch: usize,
    pub lr: f64,
    pub weighting: StepWeighting,
}

impl Default for DenoiserConfig {
    fn default() -> Self {
        Self {
            steps: 50,
            curve: AlphaCurve::Linear {
                first: 0.99,
                last: 0.8,
            },
            hidden: 64,
            train_steps: 2000,
            batch: 128,
            lr: 2e-3,
            weighting: StepWeighting::Elbo,
        }
    }
}

/// Dense network predicting `x0` from `[x_t; t / T]`.
pub struct Denoiser {
    pub schedule: DiffusionSchedule,
    pub store: ParamStore,
    pub net: Mlp,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainReport {
    /// Loss on a fixed evaluation batch before and after training.
    pub initial_loss: f64,
    pub final_loss: f64,
    pub history: Vec<f64>,
}

impl Denoiser {
    pub fn new<R: Rng + ?Sized>(cfg: &DenoiserConfig, dims: usize, rng: &mut R) -> Result<Self> {
        let schedule = DiffusionSchedule::new(cfg.steps, cfg.curve)?;
        let mut store = ParamStore::new();
        let net = Mlp::new(
            &mut store,
            &[dims + 1, cfg.hidden, cfg.hidden, dims],
            Activation::Tanh,
            Activation::Identity,
            rng,
        );
        Ok(Self { schedule, store, net })
    }

    fn loss_on(&self, tape: &mut Tape, x0: &Tensor, x_t: &Tensor, steps: &[usize], weights: &Tensor) -> Result<(acoustic_core::Var, acoustic_core::Bound)> {
        let p = self.store.bind(tape)?;
        let feat = time_feature(steps, self.schedule.steps())?;
        let xv = tape.leaf(x_t.clone())?;
        let fv = tape.leaf(feat)?;
        let input = tape.concat(&[xv, fv], 0)?;
        let pred = self.net.forward(tape, &p, input)?;
        let target = tape.leaf(x0.clone())?;
        let w = tape.leaf(weights.clone())?;
        Ok((diffusion_train_loss(tape, pred, target, w)?, p))
    }

    /// Predicted `x0` for noised columns `x_t` at the given steps.
    pub fn predict(&self, x_t: &Tensor, steps: &[usize]) -> Result<Tensor> {
        if steps.len() != x_t.cols() {
            return Err(invalid("denoiser", "one step per column"));
        }
        let mut tape = Tape::new();
        let p = self.store.bind(&mut tape)?;
        let xv = tape.leaf(x_t.clone())?;
        let fv = tape.leaf(time_feature(steps, self.schedule.steps())?)?;
        let input = tape.concat(&[xv, fv], 0)?;
        let pred = self.net.forward(&mut tape, &p, input)?;
        Ok(tape.value(pred).clone())
    }

    pub fn train<R: Rng + ?Sized>(
        &mut self,
        toy: &ClusterToy,
        cfg: &DenoiserConfig,
        rng: &mut R,
    ) -> Result<TrainReport> {
        let eval_x0 = toy.sample(512, rng)?;
        let eval_steps: Vec<usize> = (0..512).map(|j| 2 + j % (self.schedule.steps() - 1)).collect();
        let eval_noise: Vec<Vec<f64>> = (0..512).map(|_| vec![normal(rng), normal(rng)]).collect();
        let eval = noise_batch_with(&self.schedule, &eval_x0, &eval_steps, &eval_noise, cfg.weighting)?;
        let evaluate = |me: &Self| -> Result<f64> {
            let mut tape = Tape::new();
            let (l, _) = me.loss_on(&mut tape, &eval_x0, &eval.x_t, &eval.steps, &eval.weights)?;
            Ok(tape.value(l).item())
        };
        let initial_loss = evaluate(self)?;
        let mut adam = Adam::new(AdamConfig {
            lr: cfg.lr,
            ..AdamConfig::default()
        })?;
        let mut history = Vec::with_capacity(cfg.train_steps);
        for _ in 0..cfg.train_steps {
            let x0 = toy.sample(cfg.batch, rng)?;
            let nb = noise_batch(&self.schedule, &x0, cfg.weighting, rng)?;
            let mut tape = Tape::new();
            let (loss, p) = self.loss_on(&mut tape, &x0, &nb.x_t, &nb.steps, &nb.weights)?;
            history.push(tape.value(loss).item());
            let g = tape.backward(loss)?;
            adam.step(self.store.tensors_mut(), &p.grads(&g))?;
        }
        Ok(TrainReport {
            initial_loss,
            final_loss: evaluate(self)?,
            history,
        })
    }

    /// Reverse-sample `n` points from standard normal noise; returns the
    /// trajectory snapshots at every step, last entry being `x0`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, dims: usize, rng: &mut R) -> Result<Vec<Tensor>> {
        let total = self.schedule.steps();
        let mut x = Tensor::matrix(dims, n, (0..dims * n).map(|_| normal(rng)).collect())?;
        let mut trajectory = vec![x.clone()];
        for t in (1..=total).rev() {
            let x0 = self.predict(&x, &vec![t; n])?;
            let mut next = Tensor::zeros(vec![dims, n]);
            for j in 0..n {
                let col = self.schedule.posterior_step(&x.col(j), &x0.col(j), t, rng)?;
                for (i, v) in col.into_iter().enumerate() {
                    next.set(i, j, v);
                }
            }
            x = next;
            trajectory.push(x.clone());
        }
        Ok(trajectory)
    }
}
