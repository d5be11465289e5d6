use crate::error::{invalid, Result};
use crate::params::{Bound, ParamId, ParamStore};
use crate::tape::{Activation, PoolKind, Tape, Var};
use crate::tensor::Tensor;
use rand::Rng;

/// Downsampling after the convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Pooling {
    None,
    Decimate(usize),
    Average(usize),
    Max(usize),
}

/// Dilated, strided 1-D convolution over `[c_in, T]` sequences.
#[derive(Clone, Debug)]
pub struct Conv1d {
    pub w: ParamId,
    pub b: ParamId,
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub stride: usize,
    pub dilation: usize,
    pub pooling: Pooling,
    pub act: Activation,
}

pub struct ConvSpec {
    pub in_channels: usize,
    pub out_channels: usize,
    pub width: usize,
    pub stride: usize,
    pub dilation: usize,
    pub pooling: Pooling,
    pub act: Activation,
}

impl Conv1d {
    pub fn new<R: Rng + ?Sized>(store: &mut ParamStore, spec: ConvSpec, rng: &mut R) -> Result<Self> {
        if spec.width == 0 || spec.stride == 0 || spec.dilation == 0 {
            return Err(invalid("conv1d", "width, stride and dilation must be >= 1"));
        }
        if matches!(spec.pooling, Pooling::Decimate(0) | Pooling::Average(0) | Pooling::Max(0)) {
            return Err(invalid("conv1d", "pooling factor must be >= 1"));
        }
        let fan = (spec.in_channels * spec.width) as f64;
        let w = store.add(
            "conv1d.w",
            Tensor::randn(
                vec![spec.out_channels, spec.in_channels, spec.width],
                (1.0 / fan).sqrt(),
                rng,
            ),
        );
        let b = store.add("conv1d.b", Tensor::zeros(vec![spec.out_channels, 1]));
        Ok(Self {
            w,
            b,
            in_channels: spec.in_channels,
            out_channels: spec.out_channels,
            width: spec.width,
            stride: spec.stride,
            dilation: spec.dilation,
            pooling: spec.pooling,
            act: spec.act,
        })
    }

    pub fn span(&self) -> usize {
        (self.width - 1) * self.dilation + 1
    }

    /// Output length before pooling.
    pub fn conv_len(&self, t: usize) -> Option<usize> {
        (t >= self.span()).then(|| (t - self.span()) / self.stride + 1)
    }

    pub fn forward(&self, tape: &mut Tape, p: &Bound, x: Var) -> Result<Var> {
        let y = tape.conv1d(x, p.var(self.w), self.stride, self.dilation)?;
        let y = tape.add(y, p.var(self.b))?;
        let y = tape.activate(y, self.act)?;
        match self.pooling {
            Pooling::None => Ok(y),
            Pooling::Decimate(n) => tape.pool1d(y, n, PoolKind::Decimate),
            Pooling::Average(n) => tape.pool1d(y, n, PoolKind::Average),
            Pooling::Max(n) => tape.pool1d(y, n, PoolKind::Max),
        }
    }
}

/// Impulse-response length of a cascade of FIR stages of lengths `lengths`.
pub fn receptive_field(lengths: &[usize]) -> Result<usize> {
    if lengths.is_empty() || lengths.contains(&0) {
        return Err(invalid("receptive_field", "lengths must be >= 1"));
    }
    Ok(lengths.iter().sum::<usize>() - lengths.len() + 1)
}
