use crate::error::Result;
use crate::params::{Bound, ParamStore};
use crate::tape::{Activation, Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;

use super::dense::Dense;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HeadKind {
    /// Single probability.
    Sigmoid,
    /// Independent per-class probabilities.
    MultiSigmoid,
    /// Class distribution on the simplex.
    Softmax,
    /// Hard decision in `{-1, 1}` from `w^T z + b`.
    Sign,
}

/// Output layer turning an embedding `[D, B]` into scores.
#[derive(Clone, Debug)]
pub struct OutputHead {
    pub kind: HeadKind,
    pub linear: Dense,
}

impl OutputHead {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        kind: HeadKind,
        inputs: usize,
        classes: usize,
        rng: &mut R,
    ) -> Self {
        let outputs = match kind {
            HeadKind::Sigmoid | HeadKind::Sign => 1,
            HeadKind::MultiSigmoid | HeadKind::Softmax => classes,
        };
        Self {
            kind,
            linear: Dense::new(store, inputs, outputs, Activation::Identity, rng),
        }
    }

    pub fn from_linear(kind: HeadKind, linear: Dense) -> Self {
        Self { kind, linear }
    }

    /// Pre-activation scores `W z + b`; hinge losses train on these.
    pub fn logits(&self, tape: &mut Tape, p: &Bound, z: Var) -> Result<Var> {
        self.linear.pre_activation(tape, p, z)
    }

    /// Scores in the head's range. The sign head is piecewise constant, so
    /// its output is a detached leaf (`sign(0)` is taken as `1`).
    pub fn forward(&self, tape: &mut Tape, p: &Bound, z: Var) -> Result<Var> {
        let logits = self.logits(tape, p, z)?;
        match self.kind {
            HeadKind::Sigmoid | HeadKind::MultiSigmoid => tape.sigmoid(logits),
            HeadKind::Softmax => tape.softmax(logits, 0),
            HeadKind::Sign => {
                let s: Tensor = tape
                    .value(logits)
                    .map(|v| if v >= 0.0 { 1.0 } else { -1.0 });
                tape.leaf(s)
            }
        }
    }
}
