//! Dense tensors, a reverse-mode gradient tape, optimizers, normalization,
//! network layers and the loss catalog shared by every other crate.

pub mod error;
pub mod io;
pub mod gradcheck;
pub mod layers;
pub mod losses;
pub mod norm;
pub mod optim;
pub mod params;
pub mod rng;
pub mod tape;
pub mod tensor;

pub use error::{Result, TensorError};
pub use norm::{dropout, Mode, NormKind, NormState};
pub use optim::{sgd_step, Adam, AdamConfig};
pub use params::{Bound, ParamId, ParamStore};
pub use tape::{Activation, Gradients, PoolKind, Tape, Var};
pub use tensor::Tensor;
