//! Sequential networks built from a line-oriented architecture descriptor.
//!
//! One layer per line: a kind followed by `key=value` fields. Blank lines and
//! text after `#` are ignored.
//!
//! ```text
//! conv1d out=16 width=5 dilation=2 pool=max:2 act=relu
//! gru hidden=8
//! pool kind=stats
//! dense out=4 act=tanh
//! head kind=softmax classes=3
//! ```

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, RngCore};

use crate::error::{invalid, Result, TensorError};
use crate::norm::{dropout, Mode, NormKind, NormState};
use crate::params::{Bound, ParamStore};
use crate::tape::{Activation, Tape, Var};

use super::attention::Attention;
use super::conv::{Conv1d, ConvSpec, Pooling};
use super::dense::Dense;
use super::heads::{HeadKind, OutputHead};
use super::pooling::{residual, PoolingHead};
use super::recurrent::{CellKind, RecurrentCell};

#[derive(Clone, Debug, PartialEq)]
pub enum LayerSpec {
    Dense { out: usize, act: Activation },
    Residual { act: Activation },
    Conv1d { out: usize, width: usize, stride: usize, dilation: usize, pool: Pooling, act: Activation },
    Recurrent { kind: CellKind, hidden: usize },
    Attention { heads: usize, key: usize, value: usize },
    Norm { kind: NormKind, eps: f64 },
    Dropout { rate: f64 },
    Pool { kind: PoolSpec },
    Head { kind: HeadKind, classes: usize },
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum PoolSpec {
    Mean,
    Stats,
    Attentive { hidden: usize },
}

fn bad(line: usize, reason: impl fmt::Display) -> TensorError {
    invalid("descriptor", format!("line {line}: {reason}"))
}

fn parse_pooling(s: &str) -> Option<Pooling> {
    if s == "none" {
        return Some(Pooling::None);
    }
    let (kind, n) = s.split_once(':')?;
    let n: usize = n.parse().ok()?;
    match kind {
        "decimate" => Some(Pooling::Decimate(n)),
        "average" => Some(Pooling::Average(n)),
        "max" => Some(Pooling::Max(n)),
        _ => None,
    }
}

struct Fields<'a> {
    line: usize,
    map: BTreeMap<&'a str, &'a str>,
}

impl<'a> Fields<'a> {
    fn take<T: std::str::FromStr>(&mut self, key: &str, default: Option<T>) -> Result<T> {
        match self.map.remove(key) {
            Some(v) => v
                .parse()
                .map_err(|_| bad(self.line, format!("cannot parse {key}={v}"))),
            None => default.ok_or_else(|| bad(self.line, format!("missing field {key}"))),
        }
    }

    fn act(&mut self, default: Activation) -> Result<Activation> {
        match self.map.remove("act") {
            Some(v) => Activation::parse(v).ok_or_else(|| bad(self.line, format!("unknown activation {v}"))),
            None => Ok(default),
        }
    }

    fn word(&mut self, key: &str, default: Option<&'a str>) -> Result<&'a str> {
        self.map
            .remove(key)
            .or(default)
            .ok_or_else(|| bad(self.line, format!("missing field {key}")))
    }

    fn finish(self) -> Result<()> {
        match self.map.keys().next() {
            Some(k) => Err(bad(self.line, format!("unknown field {k}"))),
            None => Ok(()),
        }
    }
}

/// Parse a descriptor document into layer specs.
pub fn parse_descriptor(text: &str) -> Result<Vec<LayerSpec>> {
    let mut specs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let mut parts = content.split_whitespace();
        let kind = parts.next().unwrap_or_default();
        let mut map = BTreeMap::new();
        for p in parts {
            let (k, v) = p
                .split_once('=')
                .ok_or_else(|| bad(line, format!("expected key=value, got {p}")))?;
            if map.insert(k, v).is_some() {
                return Err(bad(line, format!("duplicate field {k}")));
            }
        }
        let mut f = Fields { line, map };
        let spec = match kind {
            "dense" => LayerSpec::Dense {
                out: f.take("out", None)?,
                act: f.act(Activation::Identity)?,
            },
            "residual" => LayerSpec::Residual {
                act: f.act(Activation::Relu)?,
            },
            "conv1d" => {
                let pool = f.word("pool", Some("none"))?;
                LayerSpec::Conv1d {
                    out: f.take("out", None)?,
                    width: f.take("width", None)?,
                    stride: f.take("stride", Some(1))?,
                    dilation: f.take("dilation", Some(1))?,
                    pool: parse_pooling(pool).ok_or_else(|| bad(line, format!("bad pool {pool}")))?,
                    act: f.act(Activation::Relu)?,
                }
            }
            "lstm" | "gru" => LayerSpec::Recurrent {
                kind: if kind == "lstm" { CellKind::Lstm } else { CellKind::Gru },
                hidden: f.take("hidden", None)?,
            },
            "attention" => LayerSpec::Attention {
                heads: f.take("heads", Some(1))?,
                key: f.take("key", None)?,
                value: f.take("value", None)?,
            },
            "norm" => {
                let k = f.word("kind", Some("layer"))?;
                LayerSpec::Norm {
                    kind: match k {
                        "batch" => NormKind::Batch,
                        "layer" => NormKind::Layer,
                        other => return Err(bad(line, format!("unknown norm kind {other}"))),
                    },
                    eps: f.take("eps", Some(1e-5))?,
                }
            }
            "dropout" => LayerSpec::Dropout {
                rate: f.take("rate", None)?,
            },
            "pool" => {
                let k = f.word("kind", Some("mean"))?;
                LayerSpec::Pool {
                    kind: match k {
                        "mean" => PoolSpec::Mean,
                        "stats" => PoolSpec::Stats,
                        "attentive" => PoolSpec::Attentive {
                            hidden: f.take("hidden", Some(16))?,
                        },
                        other => return Err(bad(line, format!("unknown pool kind {other}"))),
                    },
                }
            }
            "head" => {
                let k = f.word("kind", None)?;
                LayerSpec::Head {
                    kind: match k {
                        "sigmoid" => HeadKind::Sigmoid,
                        "multi_sigmoid" => HeadKind::MultiSigmoid,
                        "softmax" => HeadKind::Softmax,
                        "sign" => HeadKind::Sign,
                        other => return Err(bad(line, format!("unknown head kind {other}"))),
                    },
                    classes: f.take("classes", Some(1))?,
                }
            }
            other => return Err(bad(line, format!("unknown layer kind {other}"))),
        };
        f.finish()?;
        specs.push(spec);
    }
    if specs.is_empty() {
        return Err(invalid("descriptor", "no layers"));
    }
    Ok(specs)
}

#[derive(Clone, Debug)]
enum Layer {
    Dense(Dense),
    Residual(Dense),
    Conv(Conv1d),
    Recurrent(RecurrentCell),
    Attention(Attention),
    Norm(NormState),
    Dropout(f64),
    Pool(PoolingHead),
    Head(OutputHead),
}

/// A sequential model over `[D, T]` inputs.
#[derive(Clone, Debug)]
pub struct Network {
    layers: Vec<Layer>,
    input_dim: usize,
    output_dim: usize,
}

impl Network {
    pub fn build<R: Rng + ?Sized>(
        specs: &[LayerSpec],
        input_dim: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        let mut dim = input_dim;
        let mut layers = Vec::with_capacity(specs.len());
        for spec in specs {
            let layer = match *spec {
                LayerSpec::Dense { out, act } => {
                    let d = Dense::new(store, dim, out, act, rng);
                    dim = out;
                    Layer::Dense(d)
                }
                LayerSpec::Residual { act } => Layer::Residual(Dense::new(store, dim, dim, act, rng)),
                LayerSpec::Conv1d { out, width, stride, dilation, pool, act } => {
                    let c = Conv1d::new(
                        store,
                        ConvSpec {
                            in_channels: dim,
                            out_channels: out,
                            width,
                            stride,
                            dilation,
                            pooling: pool,
                            act,
                        },
                        rng,
                    )?;
                    dim = out;
                    Layer::Conv(c)
                }
                LayerSpec::Recurrent { kind, hidden } => {
                    let c = RecurrentCell::new(store, kind, dim, hidden, rng);
                    dim = hidden;
                    Layer::Recurrent(c)
                }
                LayerSpec::Attention { heads, key, value } => {
                    let a = Attention::new(store, dim, heads, key, value, rng);
                    dim = heads * value;
                    Layer::Attention(a)
                }
                LayerSpec::Norm { kind, eps } => Layer::Norm(NormState::new(store, kind, dim, eps)),
                LayerSpec::Dropout { rate } => {
                    if !(0.0..1.0).contains(&rate) {
                        return Err(invalid("descriptor", format!("dropout rate {rate} outside [0,1)")));
                    }
                    Layer::Dropout(rate)
                }
                LayerSpec::Pool { kind } => {
                    let head = match kind {
                        PoolSpec::Mean => PoolingHead::Mean,
                        PoolSpec::Stats => PoolingHead::Stats { eps: 1e-8 },
                        PoolSpec::Attentive { hidden } => {
                            PoolingHead::attentive(store, dim, hidden, None, rng)
                        }
                    };
                    dim = head.output_dim(dim, store);
                    Layer::Pool(head)
                }
                LayerSpec::Head { kind, classes } => {
                    let h = OutputHead::new(store, kind, dim, classes, rng);
                    dim = h.linear.outputs;
                    Layer::Head(h)
                }
            };
            layers.push(layer);
        }
        Ok(Self {
            layers,
            input_dim,
            output_dim: dim,
        })
    }

    pub fn from_descriptor<R: Rng + ?Sized>(
        text: &str,
        input_dim: usize,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<Self> {
        Self::build(&parse_descriptor(text)?, input_dim, store, rng)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn depth(&self) -> usize {
        self.layers.len()
    }

    /// Run every layer in order. `rng` feeds dropout masks.
    pub fn forward(
        &mut self,
        tape: &mut Tape,
        p: &Bound,
        mut x: Var,
        mode: Mode,
        rng: &mut dyn RngCore,
    ) -> Result<Var> {
        for layer in &mut self.layers {
            x = match layer {
                Layer::Dense(d) => d.forward(tape, p, x)?,
                Layer::Residual(d) => residual(tape, x, |t, v| d.forward(t, p, v))?,
                Layer::Conv(c) => c.forward(tape, p, x)?,
                Layer::Recurrent(c) => c.forward_sequence(tape, p, x)?,
                Layer::Attention(a) => a.forward(tape, p, x)?,
                Layer::Norm(n) => n.forward(tape, p, x, mode)?,
                Layer::Dropout(rate) => dropout(tape, x, *rate, rng, mode)?,
                Layer::Pool(h) => h.forward(tape, p, x)?,
                Layer::Head(h) => h.forward(tape, p, x)?,
            };
        }
        Ok(x)
    }
}
