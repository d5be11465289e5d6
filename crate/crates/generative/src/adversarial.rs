//! Adversarial objectives: the cross-entropy GAN game and the
//! gradient-penalised Wasserstein critic.

use acoustic_core::layers::{Dense, Mlp};
use acoustic_core::losses::EPS_NUM;
use acoustic_core::params::{Bound, ParamStore};
use acoustic_core::tape::{Activation, Tape, Var};
use acoustic_core::Tensor;
use rand::Rng;

use crate::error::{invalid, Result};

/// Generator objectives; each is turned into a loss to minimise.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GeneratorObjective {
    /// Maximise `E d(g(z))`.
    Linear,
    /// Maximise `E ln d(g(z))`.
    #[default]
    Log,
    /// Minimise `E ln(1 - d(g(z)))`.
    Saturating,
}

#[derive(Clone, Copy, Debug)]
pub struct GanValues {
    /// `E ln d(real) + E ln(1 - d(fake))`, which the discriminator maximises.
    pub discriminator_value: Var,
    /// Negated value, for gradient descent.
    pub discriminator_loss: Var,
    pub generator_loss: Var,
}

fn mean_log(tape: &mut Tape, p: Var) -> Result<Var> {
    let c = tape.clamp(p, EPS_NUM, f64::INFINITY)?;
    let l = tape.log(c)?;
    Ok(tape.mean(l)?)
}

/// Objectives from discriminator probabilities on a real and a generated
/// batch (`[1, B]` each).
pub fn gan_values(tape: &mut Tape, d_real: Var, d_fake: Var, objective: GeneratorObjective) -> Result<GanValues> {
    let real = mean_log(tape, d_real)?;
    let neg = tape.neg(d_fake)?;
    let miss = tape.add_scalar(neg, 1.0)?;
    let fake = mean_log(tape, miss)?;
    let value = tape.add(real, fake)?;
    let discriminator_loss = tape.neg(value)?;
    let generator_loss = match objective {
        GeneratorObjective::Linear => {
            let m = tape.mean(d_fake)?;
            tape.neg(m)?
        }
        GeneratorObjective::Log => {
            let m = mean_log(tape, d_fake)?;
            tape.neg(m)?
        }
        GeneratorObjective::Saturating => fake,
    };
    Ok(GanValues {
        discriminator_value: value,
        discriminator_loss,
        generator_loss,
    })
}

/// Scalar-output network whose input gradient is itself built from tape
/// operations, so penalties on it can be differentiated with respect to the
/// weights.
#[derive(Clone, Debug)]
pub struct Critic {
    pub net: Mlp,
}

impl Critic {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        sizes: &[usize],
        hidden: Activation,
        rng: &mut R,
    ) -> Result<Self> {
        if sizes.len() < 2 || *sizes.last().unwrap_or(&0) != 1 {
            return Err(invalid("critic", "sizes must end in a single output"));
        }
        Ok(Self {
            net: Mlp::new(store, sizes, hidden, Activation::Identity, rng),
        })
    }

    pub fn from_layers(layers: Vec<Dense>) -> Result<Self> {
        if layers.last().is_none_or(|l| l.outputs != 1) {
            return Err(invalid("critic", "last layer must have one output"));
        }
        Ok(Self { net: Mlp { layers } })
    }

    pub fn input_dim(&self) -> usize {
        self.net.layers[0].inputs
    }

    /// Scores `[1, B]` for inputs `[D, B]`.
    pub fn forward(&self, tape: &mut Tape, p: &Bound, z: Var) -> Result<Var> {
        Ok(self.net.forward(tape, p, z)?)
    }

    /// `grad_z d(z)` per column, shape `[D, B]`, plus the scores.
    pub fn input_gradient(&self, tape: &mut Tape, p: &Bound, z: Var) -> Result<(Var, Var)> {
        let mut pre = Vec::with_capacity(self.net.layers.len());
        let mut post = Vec::with_capacity(self.net.layers.len());
        let mut x = z;
        for l in &self.net.layers {
            let a = l.pre_activation(tape, p, x)?;
            x = tape.activate(a, l.act)?;
            pre.push(a);
            post.push(x);
        }
        let batch = tape.value(z).cols();
        let mut g = tape.leaf(Tensor::ones(vec![1, batch]))?;
        for (i, l) in self.net.layers.iter().enumerate().rev() {
            if let Some(d) = activation_slope(tape, l.act, pre[i], post[i])? {
                g = tape.mul(g, d)?;
            }
            let wt = tape.transpose(p.var(l.w))?;
            g = tape.matmul(wt, g)?;
        }
        Ok((g, x))
    }
}

/// Elementwise derivative of `act` as a tape expression; `None` for the
/// identity.
fn activation_slope(tape: &mut Tape, act: Activation, a: Var, y: Var) -> Result<Option<Var>> {
    let d = match act {
        Activation::Identity => return Ok(None),
        Activation::Tanh => {
            let sq = tape.square(y)?;
            let n = tape.neg(sq)?;
            tape.add_scalar(n, 1.0)?
        }
        Activation::Sigmoid => {
            let n = tape.neg(y)?;
            let one_minus = tape.add_scalar(n, 1.0)?;
            tape.mul(y, one_minus)?
        }
        Activation::Swish => {
            // s (1 + a (1 - s)) with s = sigmoid(a).
            let s = tape.sigmoid(a)?;
            let n = tape.neg(s)?;
            let one_minus = tape.add_scalar(n, 1.0)?;
            let t = tape.mul(a, one_minus)?;
            let t = tape.add_scalar(t, 1.0)?;
            tape.mul(s, t)?
        }
        Activation::Relu | Activation::LeakyRelu(_) => {
            // Piecewise linear: the slope is locally constant.
            let slope = if let Activation::LeakyRelu(s) = act { s } else { 0.0 };
            let mask = tape.value(a).map(|v| if v > 0.0 { 1.0 } else { slope });
            tape.leaf(mask)?
        }
    };
    Ok(Some(d))
}

#[derive(Clone, Copy, Debug)]
pub struct WganValues {
    /// `E d(target) - E d(generated) + lambda E (||grad d(z)|| - 1)^2`.
    pub value: Var,
    /// `E d(target) - E d(generated)`.
    pub difference: Var,
    /// `E (||grad d(z)|| - 1)^2`, before the coefficient.
    pub penalty: Var,
    /// `-difference + lambda penalty`, minimised by the critic.
    pub critic_loss: Var,
    /// `-E d(generated)`, minimised by the generator.
    pub generator_loss: Var,
}

/// Gradient-penalised Wasserstein objective on target `[D, B]` and
/// generated `[D, B]` batches mixed with per-column weights `mix` in
/// `[0, 1]`.
pub fn wgan_gp_value(
    tape: &mut Tape,
    p: &Bound,
    critic: &Critic,
    target: Var,
    generated: Var,
    mix: &[f64],
    lambda: f64,
) -> Result<WganValues> {
    if !(lambda >= 0.0) {
        return Err(invalid("wgan_gp", "penalty coefficient must be nonnegative"));
    }
    let shape = tape.value(target).shape().to_vec();
    if tape.value(generated).shape() != shape.as_slice() || shape.len() != 2 || mix.len() != shape[1] {
        return Err(invalid("wgan_gp", "batches and mixing weights must agree"));
    }
    let eps = tape.leaf(Tensor::matrix(1, mix.len(), mix.to_vec())?)?;
    let one_minus = tape.leaf(Tensor::matrix(1, mix.len(), mix.iter().map(|e| 1.0 - e).collect())?)?;
    let a = tape.mul(target, eps)?;
    let b = tape.mul(generated, one_minus)?;
    let z = tape.add(a, b)?;
    let (grad, _) = critic.input_gradient(tape, p, z)?;
    let sq = tape.square(grad)?;
    let norm2 = tape.sum_axis(sq, 0)?;
    // Keeps the norm differentiable where the input gradient vanishes.
    let norm2 = tape.add_scalar(norm2, EPS_NUM)?;
    let norm = tape.sqrt(norm2)?;
    let gap = tape.add_scalar(norm, -1.0)?;
    let gap = tape.square(gap)?;
    let penalty = tape.mean(gap)?;
    let dt = critic.forward(tape, p, target)?;
    let dg = critic.forward(tape, p, generated)?;
    let mt = tape.mean(dt)?;
    let mg = tape.mean(dg)?;
    let difference = tape.sub(mt, mg)?;
    let weighted = tape.scale(penalty, lambda)?;
    let value = tape.add(difference, weighted)?;
    let neg = tape.neg(difference)?;
    let critic_loss = tape.add(neg, weighted)?;
    let generator_loss = tape.neg(mg)?;
    Ok(WganValues {
        value,
        difference,
        penalty,
        critic_loss,
        generator_loss,
    })
}
