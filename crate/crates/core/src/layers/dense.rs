use crate::error::{invalid, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tape::{Activation, Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;

/// Fully connected layer `act(W x + b)` over column batches `[in, B]`.
#[derive(Clone, Debug)]
pub struct Dense {
    pub w: ParamId,
    pub b: ParamId,
    pub inputs: usize,
    pub outputs: usize,
    pub act: Activation,
}

impl Dense {
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        inputs: usize,
        outputs: usize,
        act: Activation,
        rng: &mut R,
    ) -> Self {
        let std = (2.0 / (inputs + outputs) as f64).sqrt();
        let w = store.add("dense.w", Tensor::randn(vec![outputs, inputs], std, rng));
        let b = store.add("dense.b", Tensor::zeros(vec![outputs, 1]));
        Self {
            w,
            b,
            inputs,
            outputs,
            act,
        }
    }

    /// Wrap existing parameters.
    pub fn from_params(store: &mut ParamStore, w: Tensor, b: Tensor, act: Activation) -> Result<Self> {
        if w.rank() != 2 || b.shape() != [w.shape()[0], 1] {
            return Err(invalid("dense", format!("w {:?} / b {:?}", w.shape(), b.shape())));
        }
        let (outputs, inputs) = (w.shape()[0], w.shape()[1]);
        let w = store.add("dense.w", w);
        let b = store.add("dense.b", b);
        Ok(Self {
            w,
            b,
            inputs,
            outputs,
            act,
        })
    }

    pub fn pre_activation(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let wx = tape.matmul(p.var(self.w), x)?;
        tape.add(wx, p.var(self.b))
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let z = self.pre_activation(tape, p, x)?;
        tape.activate(z, self.act)
    }
}

/// Stack of dense layers.
#[derive(Clone, Debug)]
pub struct Mlp {
    pub layers: Vec<Dense>,
}

impl Mlp {
    /// `sizes = [in, h1, ..., out]`; hidden layers use `hidden`, the last
    /// layer uses `last`.
    pub fn new<R: Rng + ?Sized>(
        store: &mut ParamStore,
        sizes: &[usize],
        hidden: Activation,
        last: Activation,
        rng: &mut R,
    ) -> Self {
        let n = sizes.len() - 1;
        let layers = (0..n)
            .map(|i| {
                let act = if i + 1 == n { last } else { hidden };
                Dense::new(store, sizes[i], sizes[i + 1], act, rng)
            })
            .collect();
        Self { layers }
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, mut x: Var) -> Result<Var> {
        for l in &self.layers {
            x = l.forward(tape, p, x)?;
        }
        Ok(x)
    }

    /// Outputs of every layer, in order.
    pub fn forward_all(&self, tape: &mut Tape, p: &Bound, mut x: Var) -> Result<Vec<Var>> {
        let mut outs = Vec::with_capacity(self.layers.len());
        for l in &self.layers {
            x = l.forward(tape, p, x)?;
            outs.push(x);
        }
        Ok(outs)
    }
}
