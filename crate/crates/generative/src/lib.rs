//! Generative objectives: adversarial games and variational diffusion.

pub mod adversarial;
pub mod diffusion;
pub mod error;
pub mod toy;

pub use adversarial::{gan_values, wgan_gp_value, Critic, GanValues, GeneratorObjective, WganValues};
pub use diffusion::{
    diffusion_train_loss, noise_batch, noise_batch_with, time_feature, AlphaCurve, DiffusionSchedule,
    NoisedBatch, StepWeighting,
};
pub use error::{GenerativeError, Result};
pub use toy::{ClusterToy, Denoiser, DenoiserConfig, GanToy, TrainReport};
