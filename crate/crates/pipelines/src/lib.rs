//! Seeded synthetic datasets and the end-to-end recipes built on them:
//! mask denoising, permutation-invariant separation, weakly labelled event
//! detection, speaker enrollment and direction-of-arrival estimation.
//!
//! Randomness is fanned out from seeds with [`acoustic_core::rng::stream`]:
//! under a dataset seed, stream 0 drives the train/held-out split and
//! stream `i + 1` generates clip `i`; under a training seed, fixed stream
//! ids in [`train`] drive initialization and shuffling.

pub mod denoise;
pub mod doa;
pub mod error;
pub mod features;
pub mod sed;
pub mod separate;
pub mod speaker;
pub mod synth;
pub mod train;

pub use error::{PipelineError, Result, StateDump};
pub use synth::{synth_generate, Dataset, SynthSpec, TaskKind};
pub use train::{fit, EpochRecord, FitReport, TrainConfig};
