//! Reverse-mode automatic differentiation on an append-only tape.
//!
//! Every operation appends a node holding its forward value and the
//! handles of its inputs. Because nodes can only reference earlier
//! nodes, replaying the tape backwards visits each node once after all
//! of its consumers.
//!
//! ```
//! use acoustic_core::{Tape, Tensor};
//!
//! let mut tape = Tape::new();
//! let w = tape.leaf(Tensor::vector(vec![1.0, 2.0])).unwrap();
//! let x = tape.leaf(Tensor::vector(vec![3.0, 4.0])).unwrap();
//! let p = tape.mul(w, x).unwrap();
//! let loss = tape.sum(p).unwrap();
//! let grads = tape.backward(loss).unwrap();
//! assert_eq!(grads.wrt(w).data(), &[3.0, 4.0]);
//! ```

use crate::error::{invalid, Result, TensorError};
use crate::tensor::{
    axis_split, broadcast_shape, broadcast_strides, for_each_broadcast, matmul_raw, unbroadcast,
    Tensor,
};

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Var(pub(crate) usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Elementwise nonlinearities.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Activation {
    Identity,
    Sigmoid,
    Relu,
    LeakyRelu(f64),
    Swish,
    Tanh,
}

impl Activation {
    pub fn apply(self, x: f64) -> f64 {
        match self {
            Activation::Identity => x,
            Activation::Sigmoid => sigmoid(x),
            Activation::Relu => x.max(0.0),
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    x
                } else {
                    a * x
                }
            }
            Activation::Swish => x * sigmoid(x),
            Activation::Tanh => x.tanh(),
        }
    }

    /// Derivative given input `x` and output `y`.
    fn derivative(self, x: f64, y: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Sigmoid => y * (1.0 - y),
            Activation::Relu => {
                if x > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::LeakyRelu(a) => {
                if x > 0.0 {
                    1.0
                } else {
                    a
                }
            }
            Activation::Swish => {
                let s = sigmoid(x);
                s + x * s * (1.0 - s)
            }
            Activation::Tanh => 1.0 - y * y,
        }
    }

    pub fn name(self) -> String {
        match self {
            Activation::Identity => "identity".into(),
            Activation::Sigmoid => "sigmoid".into(),
            Activation::Relu => "relu".into(),
            Activation::LeakyRelu(a) => format!("leaky_relu({a})"),
            Activation::Swish => "swish".into(),
            Activation::Tanh => "tanh".into(),
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        let s = s.trim();
        Some(match s {
            "identity" | "linear" => Activation::Identity,
            "sigmoid" => Activation::Sigmoid,
            "relu" => Activation::Relu,
            "swish" => Activation::Swish,
            "tanh" => Activation::Tanh,
            _ => {
                let inner = s.strip_prefix("leaky_relu(")?.strip_suffix(')')?;
                let a: f64 = inner.parse().ok()?;
                if !(a > 0.0 && a < 1.0) {
                    return None;
                }
                Activation::LeakyRelu(a)
            }
        })
    }
}

pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Downsampling applied after a 1-D convolution.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PoolKind {
    /// Keep element 0 of each group.
    Decimate,
    Average,
    /// Gradient goes to the first maximal element of each group.
    Max,
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    Div(Var, Var),
    Neg(Var),
    Scale(Var, f64),
    AddScalar(Var),
    MatMul(Var, Var),
    Transpose(Var),
    Reshape(Var),
    Concat(Vec<Var>, usize),
    Slice {
        x: Var,
        axis: usize,
        start: usize,
    },
    Sum(Var),
    SumAxis(Var, usize),
    Max(Var, usize),
    MaxAxis(Var, Vec<usize>),
    Act(Var, Activation),
    Softmax(Var, usize),
    LogSoftmax(Var, usize),
    Log(Var),
    Exp(Var),
    Sqrt(Var),
    Abs(Var),
    Huber(Var, f64),
    Clamp(Var, f64, f64),
    Pow(Var, f64),
    Inverse(Var),
    Conv1d {
        x: Var,
        w: Var,
        stride: usize,
        dilation: usize,
    },
    Pool {
        x: Var,
        n: usize,
        kind: PoolKind,
        picks: Vec<usize>,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

/// Recorded computation graph.
#[derive(Default)]
pub struct Tape {
    nodes: Vec<Node>,
}

/// Gradients of a scalar loss with respect to every node of a tape.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient for `v`; zeros when the loss does not depend on it.
    pub fn wrt(&self, v: Var) -> Tensor {
        match &self.grads[v.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(self.shapes[v.0].clone()),
        }
    }

    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads[v.0].as_ref()
    }
}

fn mismatch(op: &'static str, a: &Tensor, b: &Tensor) -> TensorError {
    TensorError::ShapeMismatch {
        op,
        left: a.shape().to_vec(),
        right: b.shape().to_vec(),
    }
}

fn check_axis(t: &Tensor, axis: usize) -> Result<()> {
    if axis >= t.rank() {
        return Err(TensorError::BadAxis {
            axis,
            rank: t.rank(),
        });
    }
    Ok(())
}

fn reduced_shape(shape: &[usize], axis: usize) -> Vec<usize> {
    let mut s = shape.to_vec();
    s[axis] = 1;
    s
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    fn push(&mut self, op_name: &'static str, value: Tensor, op: Op) -> Result<Var> {
        if !value.is_finite() {
            return Err(TensorError::NonFinite { op: op_name });
        }
        self.nodes.push(Node { value, op });
        Ok(Var(self.nodes.len() - 1))
    }

    /// Input or parameter node. Values must be finite.
    pub fn leaf(&mut self, value: Tensor) -> Result<Var> {
        self.push("leaf", value, Op::Leaf)
    }

    pub fn scalar(&mut self, v: f64) -> Result<Var> {
        self.leaf(Tensor::scalar(v))
    }

    fn binary(
        &mut self,
        name: &'static str,
        a: Var,
        b: Var,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() == tb.shape() {
            return ta.zip_map(tb, f);
        }
        let out = broadcast_shape(ta.shape(), tb.shape()).ok_or_else(|| mismatch(name, ta, tb))?;
        let sa = broadcast_strides(ta.shape(), &out);
        let sb = broadcast_strides(tb.shape(), &out);
        let mut data = vec![0.0; out.iter().product()];
        let (da, db) = (ta.data(), tb.data());
        for_each_broadcast(&out, &sa, &sb, |lin, ia, ib| data[lin] = f(da[ia], db[ib]));
        Tensor::new(out, data)
    }

    /// Elementwise sum with broadcasting.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("add", a, b, |x, y| x + y)?;
        self.push("add", v, Op::Add(a, b))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("sub", a, b, |x, y| x - y)?;
        self.push("sub", v, Op::Sub(a, b))
    }

    /// Elementwise (Hadamard) product with broadcasting.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("mul", a, b, |x, y| x * y)?;
        self.push("mul", v, Op::Mul(a, b))
    }

    pub fn div(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.binary("div", a, b, |x, y| x / y)?;
        self.push("div", v, Op::Div(a, b))
    }

    pub fn neg(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(|x| -x);
        self.push("neg", v, Op::Neg(a))
    }

    pub fn scale(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x * c);
        self.push("scale", v, Op::Scale(a, c))
    }

    pub fn add_scalar(&mut self, a: Var, c: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x + c);
        self.push("add_scalar", v, Op::AddScalar(a))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = self.value(a).matmul(self.value(b))?;
        self.push("matmul", v, Op::MatMul(a, b))
    }

    /// Transpose of a 2-D tensor (1-D inputs become columns' transpose).
    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() > 2 {
            return Err(invalid("transpose", format!("rank {} > 2", t.rank())));
        }
        let v = t.transpose();
        self.push("transpose", v, Op::Transpose(a))
    }

    pub fn reshape(&mut self, a: Var, shape: impl Into<Vec<usize>>) -> Result<Var> {
        let v = self.value(a).reshape(shape)?;
        self.push("reshape", v, Op::Reshape(a))
    }

    /// Concatenate along `axis`; all other extents must agree.
    pub fn concat(&mut self, parts: &[Var], axis: usize) -> Result<Var> {
        let first = self
            .value(*parts.first().ok_or_else(|| invalid("concat", "no inputs"))?)
            .clone();
        check_axis(&first, axis)?;
        let mut extent = 0;
        for &p in parts {
            let t = self.value(p);
            let same_rank = t.rank() == first.rank();
            let same_other = same_rank
                && t
                    .shape()
                    .iter()
                    .zip(first.shape())
                    .enumerate()
                    .all(|(i, (a, b))| i == axis || a == b);
            if !same_other {
                return Err(mismatch("concat", &first, t));
            }
            extent += t.shape()[axis];
        }
        let mut shape = first.shape().to_vec();
        shape[axis] = extent;
        let (outer, _, inner) = axis_split(&shape, axis);
        let mut data = Vec::with_capacity(shape.iter().product());
        for o in 0..outer {
            for &p in parts {
                let t = self.value(p);
                let e = t.shape()[axis];
                data.extend_from_slice(&t.data()[o * e * inner..(o + 1) * e * inner]);
            }
        }
        let v = Tensor::new(shape, data)?;
        self.push("concat", v, Op::Concat(parts.to_vec(), axis))
    }

    /// `len` consecutive entries along `axis` starting at `start`.
    pub fn slice(&mut self, x: Var, axis: usize, start: usize, len: usize) -> Result<Var> {
        let t = self.value(x);
        check_axis(t, axis)?;
        if len == 0 || start + len > t.shape()[axis] {
            return Err(invalid(
                "slice",
                format!("range {start}..{} outside extent {}", start + len, t.shape()[axis]),
            ));
        }
        let (outer, e, inner) = axis_split(t.shape(), axis);
        let mut data = Vec::with_capacity(outer * len * inner);
        for o in 0..outer {
            let base = o * e * inner + start * inner;
            data.extend_from_slice(&t.data()[base..base + len * inner]);
        }
        let mut shape = t.shape().to_vec();
        shape[axis] = len;
        let v = Tensor::new(shape, data)?;
        self.push("slice", v, Op::Slice { x, axis, start })
    }

    /// Sum of all entries (scalar).
    pub fn sum(&mut self, a: Var) -> Result<Var> {
        let v = Tensor::scalar(self.value(a).sum());
        self.push("sum", v, Op::Sum(a))
    }

    /// Sum along `axis`, keeping it with extent 1.
    pub fn sum_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        check_axis(t, axis)?;
        let (outer, e, inner) = axis_split(t.shape(), axis);
        let mut data = vec![0.0; outer * inner];
        for o in 0..outer {
            for k in 0..e {
                for i in 0..inner {
                    data[o * inner + i] += t.data()[(o * e + k) * inner + i];
                }
            }
        }
        let v = Tensor::new(reduced_shape(t.shape(), axis), data)?;
        self.push("sum_axis", v, Op::SumAxis(a, axis))
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len() as f64;
        let s = self.sum(a)?;
        self.scale(s, 1.0 / n)
    }

    pub fn mean_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        check_axis(t, axis)?;
        let n = t.shape()[axis] as f64;
        let s = self.sum_axis(a, axis)?;
        self.scale(s, 1.0 / n)
    }

    /// Maximum entry; the gradient flows to the first maximum.
    pub fn max(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        let mut best = 0;
        for (i, &v) in t.data().iter().enumerate() {
            if v > t.data()[best] {
                best = i;
            }
        }
        let v = Tensor::scalar(t.data()[best]);
        self.push("max", v, Op::Max(a, best))
    }

    /// Maximum along `axis` (kept with extent 1), first maximum wins.
    pub fn max_axis(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        check_axis(t, axis)?;
        let (outer, e, inner) = axis_split(t.shape(), axis);
        let mut data = vec![0.0; outer * inner];
        let mut picks = vec![0; outer * inner];
        for o in 0..outer {
            for i in 0..inner {
                let mut best = (o * e) * inner + i;
                for k in 1..e {
                    let idx = (o * e + k) * inner + i;
                    if t.data()[idx] > t.data()[best] {
                        best = idx;
                    }
                }
                data[o * inner + i] = t.data()[best];
                picks[o * inner + i] = best;
            }
        }
        let v = Tensor::new(reduced_shape(t.shape(), axis), data)?;
        self.push("max_axis", v, Op::MaxAxis(a, picks))
    }

    pub fn activate(&mut self, a: Var, act: Activation) -> Result<Var> {
        if let Activation::LeakyRelu(s) = act {
            if !(s > 0.0 && s < 1.0) {
                return Err(invalid("leaky_relu", format!("slope {s} outside (0,1)")));
            }
        }
        if act == Activation::Identity {
            return Ok(a);
        }
        let v = self.value(a).map(|x| act.apply(x));
        self.push("activation", v, Op::Act(a, act))
    }

    pub fn sigmoid(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Sigmoid)
    }

    pub fn relu(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Relu)
    }

    pub fn leaky_relu(&mut self, a: Var, slope: f64) -> Result<Var> {
        self.activate(a, Activation::LeakyRelu(slope))
    }

    pub fn swish(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Swish)
    }

    pub fn tanh(&mut self, a: Var) -> Result<Var> {
        self.activate(a, Activation::Tanh)
    }

    /// Softmax along `axis`.
    pub fn softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        check_axis(t, axis)?;
        let v = softmax_along(t, axis, false);
        self.push("softmax", v, Op::Softmax(a, axis))
    }

    /// Numerically stable log-softmax along `axis`.
    pub fn log_softmax(&mut self, a: Var, axis: usize) -> Result<Var> {
        let t = self.value(a);
        check_axis(t, axis)?;
        let v = softmax_along(t, axis, true);
        self.push("log_softmax", v, Op::LogSoftmax(a, axis))
    }

    pub fn log(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::ln);
        self.push("log", v, Op::Log(a))
    }

    pub fn exp(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::exp);
        self.push("exp", v, Op::Exp(a))
    }

    pub fn sqrt(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.data().iter().any(|&x| x < 0.0) {
            return Err(TensorError::NonFinite { op: "sqrt" });
        }
        let v = t.map(f64::sqrt);
        self.push("sqrt", v, Op::Sqrt(a))
    }

    pub fn abs(&mut self, a: Var) -> Result<Var> {
        let v = self.value(a).map(f64::abs);
        self.push("abs", v, Op::Abs(a))
    }

    pub fn square(&mut self, a: Var) -> Result<Var> {
        self.mul(a, a)
    }

    /// Elementwise Huber penalty with switch point `delta`.
    pub fn huber(&mut self, a: Var, delta: f64) -> Result<Var> {
        if delta <= 0.0 {
            return Err(invalid("huber", "delta must be positive"));
        }
        let v = self.value(a).map(|e| {
            if e.abs() <= delta {
                0.5 * e * e
            } else {
                delta * e.abs() - 0.5 * delta * delta
            }
        });
        self.push("huber", v, Op::Huber(a, delta))
    }

    /// Clamp into `[lo, hi]`; gradient is zero where clamping is active.
    pub fn clamp(&mut self, a: Var, lo: f64, hi: f64) -> Result<Var> {
        let v = self.value(a).map(|x| x.clamp(lo, hi));
        self.push("clamp", v, Op::Clamp(a, lo, hi))
    }

    /// Elementwise `x^p`. Negative bases are rejected unless `p` is an
    /// integer.
    pub fn pow(&mut self, a: Var, p: f64) -> Result<Var> {
        let t = self.value(a);
        if p.fract() != 0.0 && t.data().iter().any(|&x| x < 0.0) {
            return Err(invalid("pow", "fractional power of a negative value"));
        }
        let v = t.map(|x| x.powf(p));
        self.push("pow", v, Op::Pow(a, p))
    }

    /// Inverse of a square matrix.
    pub fn inverse(&mut self, a: Var) -> Result<Var> {
        let t = self.value(a);
        if t.rank() != 2 || t.rows() != t.cols() {
            return Err(invalid("inverse", format!("expected a square matrix, got {:?}", t.shape())));
        }
        let n = t.rows();
        let m = nalgebra::DMatrix::from_row_slice(n, n, t.data());
        let inv = m
            .try_inverse()
            .ok_or_else(|| invalid("inverse", "matrix is singular"))?;
        let data: Vec<f64> = (0..n).flat_map(|r| (0..n).map(move |c| (r, c))).map(|(r, c)| inv[(r, c)]).collect();
        let v = Tensor::new(vec![n, n], data)?;
        self.push("inverse", v, Op::Inverse(a))
    }

    /// Valid-mode 1-D convolution. `x` is `[c_in, T]`, `w` is
    /// `[c_out, c_in, width]`; output is `[c_out, T']` with
    /// `T' = (T - span) / stride + 1` and `span = (width - 1) * dilation + 1`.
    pub fn conv1d(&mut self, x: Var, w: Var, stride: usize, dilation: usize) -> Result<Var> {
        let (tx, tw) = (self.value(x), self.value(w));
        if tx.rank() != 2 || tw.rank() != 3 || tw.shape()[1] != tx.shape()[0] {
            return Err(mismatch("conv1d", tx, tw));
        }
        if stride == 0 || dilation == 0 {
            return Err(invalid("conv1d", "stride and dilation must be >= 1"));
        }
        let (cin, t) = (tx.shape()[0], tx.shape()[1]);
        let (cout, width) = (tw.shape()[0], tw.shape()[2]);
        let span = (width - 1) * dilation + 1;
        if t < span {
            return Err(invalid(
                "conv1d",
                format!("input length {t} shorter than kernel span {span}"),
            ));
        }
        let tout = (t - span) / stride + 1;
        let mut data = vec![0.0; cout * tout];
        let (xd, wd) = (tx.data(), tw.data());
        for o in 0..cout {
            for c in 0..cin {
                for l in 0..width {
                    let wv = wd[(o * cin + c) * width + l];
                    let xrow = &xd[c * t..(c + 1) * t];
                    let orow = &mut data[o * tout..(o + 1) * tout];
                    for (j, out) in orow.iter_mut().enumerate() {
                        *out += wv * xrow[j * stride + l * dilation];
                    }
                }
            }
        }
        let v = Tensor::new(vec![cout, tout], data)?;
        self.push(
            "conv1d",
            v,
            Op::Conv1d {
                x,
                w,
                stride,
                dilation,
            },
        )
    }

    /// Non-overlapping pooling over groups of `n` along the last axis of a
    /// `[c, T]` tensor; a trailing partial group is dropped.
    pub fn pool1d(&mut self, x: Var, n: usize, kind: PoolKind) -> Result<Var> {
        let tx = self.value(x);
        if tx.rank() != 2 || n == 0 || tx.shape()[1] < n {
            return Err(invalid(
                "pool1d",
                format!("cannot pool shape {:?} by {n}", tx.shape()),
            ));
        }
        let (c, t) = (tx.shape()[0], tx.shape()[1]);
        let tout = t / n;
        let mut data = vec![0.0; c * tout];
        let mut picks = vec![0; c * tout];
        for ch in 0..c {
            for j in 0..tout {
                let base = ch * t + j * n;
                let group = &tx.data()[base..base + n];
                let (val, pick) = match kind {
                    PoolKind::Decimate => (group[0], base),
                    PoolKind::Average => (group.iter().sum::<f64>() / n as f64, base),
                    PoolKind::Max => {
                        let mut b = 0;
                        for k in 1..n {
                            if group[k] > group[b] {
                                b = k;
                            }
                        }
                        (group[b], base + b)
                    }
                };
                data[ch * tout + j] = val;
                picks[ch * tout + j] = pick;
            }
        }
        let v = Tensor::new(vec![c, tout], data)?;
        self.push("pool1d", v, Op::Pool { x, n, kind, picks })
    }

    /// Reverse pass from a scalar `loss`.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let lv = self.value(loss);
        if lv.len() != 1 {
            return Err(TensorError::NotScalar(lv.shape().to_vec()));
        }
        let n = loss.0 + 1;
        for (i, node) in self.nodes[..n].iter().enumerate() {
            for input in op_inputs(&node.op) {
                if input.0 >= i {
                    return Err(TensorError::Cycle {
                        node: i,
                        input: input.0,
                    });
                }
            }
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; self.nodes.len()];
        grads[loss.0] = Some(Tensor::full(lv.shape().to_vec(), 1.0));
        for i in (0..n).rev() {
            let Some(g) = grads[i].clone() else { continue };
            self.propagate(i, &g, &mut grads)?;
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape().to_vec()).collect(),
        })
    }

    fn propagate(&self, i: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[i];
        let y = &node.value;
        let val = |v: Var| &self.nodes[v.0].value;
        match &node.op {
            Op::Leaf => {}
            Op::Add(a, b) => {
                accumulate(grads, *a, unbroadcast(g, val(*a).shape()));
                accumulate(grads, *b, unbroadcast(g, val(*b).shape()));
            }
            Op::Sub(a, b) => {
                accumulate(grads, *a, unbroadcast(g, val(*a).shape()));
                accumulate(grads, *b, unbroadcast(g, val(*b).shape()).scale(-1.0));
            }
            Op::Mul(a, b) | Op::Div(a, b) => {
                let is_div = matches!(node.op, Op::Div(..));
                let (ta, tb) = (val(*a), val(*b));
                let sa = broadcast_strides(ta.shape(), g.shape());
                let sb = broadcast_strides(tb.shape(), g.shape());
                let mut ga = vec![0.0; ta.len()];
                let mut gb = vec![0.0; tb.len()];
                let (da, db, dg) = (ta.data(), tb.data(), g.data());
                for_each_broadcast(g.shape(), &sa, &sb, |lin, ia, ib| {
                    if is_div {
                        ga[ia] += dg[lin] / db[ib];
                        gb[ib] -= dg[lin] * da[ia] / (db[ib] * db[ib]);
                    } else {
                        ga[ia] += dg[lin] * db[ib];
                        gb[ib] += dg[lin] * da[ia];
                    }
                });
                accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), ga)?);
                accumulate(grads, *b, Tensor::new(tb.shape().to_vec(), gb)?);
            }
            Op::Neg(a) => accumulate(grads, *a, g.scale(-1.0)),
            Op::Scale(a, c) => accumulate(grads, *a, g.scale(*c)),
            Op::AddScalar(a) => accumulate(grads, *a, g.clone()),
            Op::Pow(a, p) => {
                let p = *p;
                let gx = g.zip_map(val(*a), |gv, x| if p == 0.0 { 0.0 } else { gv * p * x.powf(p - 1.0) })?;
                accumulate(grads, *a, gx);
            }
            Op::Inverse(a) => {
                // d(A^-1) = -A^-1 dA A^-1, so dL/dA = -A^-T G A^-T.
                let yt = y.transpose();
                let ga = yt.matmul(g)?.matmul(&yt)?.scale(-1.0);
                accumulate(grads, *a, ga);
            }
            Op::MatMul(a, b) => {
                let (ta, tb) = (val(*a), val(*b));
                let (m, k, nn) = (ta.shape()[0], ta.shape()[1], tb.shape()[1]);
                let bt = tb.transpose();
                let ga = matmul_raw(g.data(), bt.data(), m, nn, k);
                let at = ta.transpose();
                let gb = matmul_raw(at.data(), g.data(), k, m, nn);
                accumulate(grads, *a, Tensor::new(vec![m, k], ga)?);
                accumulate(grads, *b, Tensor::new(vec![k, nn], gb)?);
            }
            Op::Transpose(a) => {
                let gt = g.transpose().reshape(val(*a).shape().to_vec())?;
                accumulate(grads, *a, gt);
            }
            Op::Reshape(a) => accumulate(grads, *a, g.reshape(val(*a).shape().to_vec())?),
            Op::Concat(parts, axis) => {
                let (outer, e_total, inner) = axis_split(g.shape(), *axis);
                let mut offset = 0;
                for &p in parts {
                    let tp = val(p);
                    let e = tp.shape()[*axis];
                    let mut data = Vec::with_capacity(tp.len());
                    for o in 0..outer {
                        let base = (o * e_total + offset) * inner;
                        data.extend_from_slice(&g.data()[base..base + e * inner]);
                    }
                    accumulate(grads, p, Tensor::new(tp.shape().to_vec(), data)?);
                    offset += e;
                }
            }
            Op::Slice { x, axis, start } => {
                let tx = val(*x);
                let (outer, e, inner) = axis_split(tx.shape(), *axis);
                let len = g.shape()[*axis];
                let mut data = vec![0.0; tx.len()];
                for o in 0..outer {
                    let src = o * len * inner;
                    let dst = (o * e + start) * inner;
                    data[dst..dst + len * inner].copy_from_slice(&g.data()[src..src + len * inner]);
                }
                accumulate(grads, *x, Tensor::new(tx.shape().to_vec(), data)?);
            }
            Op::Sum(a) => accumulate(grads, *a, Tensor::full(val(*a).shape().to_vec(), g.item())),
            Op::SumAxis(a, axis) => {
                let ta = val(*a);
                let (outer, e, inner) = axis_split(ta.shape(), *axis);
                let mut data = vec![0.0; ta.len()];
                for o in 0..outer {
                    for k in 0..e {
                        for ii in 0..inner {
                            data[(o * e + k) * inner + ii] = g.data()[o * inner + ii];
                        }
                    }
                }
                accumulate(grads, *a, Tensor::new(ta.shape().to_vec(), data)?);
            }
            Op::Max(a, pick) => {
                let mut d = Tensor::zeros(val(*a).shape().to_vec());
                d.data_mut()[*pick] = g.item();
                accumulate(grads, *a, d);
            }
            Op::MaxAxis(a, picks) => {
                let mut d = Tensor::zeros(val(*a).shape().to_vec());
                for (j, &p) in picks.iter().enumerate() {
                    d.data_mut()[p] += g.data()[j];
                }
                accumulate(grads, *a, d);
            }
            Op::Act(a, act) => {
                let x = val(*a);
                let data = x
                    .data()
                    .iter()
                    .zip(y.data())
                    .zip(g.data())
                    .map(|((&xv, &yv), &gv)| gv * act.derivative(xv, yv))
                    .collect();
                accumulate(grads, *a, Tensor::new(x.shape().to_vec(), data)?);
            }
            Op::Softmax(a, axis) => {
                let (outer, e, inner) = axis_split(y.shape(), *axis);
                let mut data = vec![0.0; y.len()];
                for o in 0..outer {
                    for ii in 0..inner {
                        let idx = |k: usize| (o * e + k) * inner + ii;
                        let dot: f64 = (0..e).map(|k| g.data()[idx(k)] * y.data()[idx(k)]).sum();
                        for k in 0..e {
                            data[idx(k)] = y.data()[idx(k)] * (g.data()[idx(k)] - dot);
                        }
                    }
                }
                accumulate(grads, *a, Tensor::new(y.shape().to_vec(), data)?);
            }
            Op::LogSoftmax(a, axis) => {
                let (outer, e, inner) = axis_split(y.shape(), *axis);
                let mut data = vec![0.0; y.len()];
                for o in 0..outer {
                    for ii in 0..inner {
                        let idx = |k: usize| (o * e + k) * inner + ii;
                        let gs: f64 = (0..e).map(|k| g.data()[idx(k)]).sum();
                        for k in 0..e {
                            data[idx(k)] = g.data()[idx(k)] - y.data()[idx(k)].exp() * gs;
                        }
                    }
                }
                accumulate(grads, *a, Tensor::new(y.shape().to_vec(), data)?);
            }
            Op::Log(a) => accumulate(grads, *a, g.zip_map(val(*a), |gv, x| gv / x)?),
            Op::Exp(a) => accumulate(grads, *a, g.zip_map(y, |gv, yv| gv * yv)?),
            Op::Sqrt(a) => accumulate(grads, *a, g.zip_map(y, |gv, yv| gv / (2.0 * yv))?),
            Op::Abs(a) => accumulate(grads, *a, g.zip_map(val(*a), |gv, x| gv * sign(x))?),
            Op::Huber(a, d) => {
                let d = *d;
                let gx = g.zip_map(val(*a), |gv, e| {
                    if e.abs() <= d {
                        gv * e
                    } else {
                        gv * d * sign(e)
                    }
                })?;
                accumulate(grads, *a, gx);
            }
            Op::Clamp(a, lo, hi) => {
                let (lo, hi) = (*lo, *hi);
                let gx = g.zip_map(val(*a), |gv, x| if x < lo || x > hi { 0.0 } else { gv })?;
                accumulate(grads, *a, gx);
            }
            Op::Conv1d {
                x,
                w,
                stride,
                dilation,
            } => {
                let (tx, tw) = (val(*x), val(*w));
                let (cin, t) = (tx.shape()[0], tx.shape()[1]);
                let (cout, width) = (tw.shape()[0], tw.shape()[2]);
                let tout = g.shape()[1];
                let mut gx = vec![0.0; tx.len()];
                let mut gw = vec![0.0; tw.len()];
                for o in 0..cout {
                    let grow = &g.data()[o * tout..(o + 1) * tout];
                    for c in 0..cin {
                        for l in 0..width {
                            let widx = (o * cin + c) * width + l;
                            let wv = tw.data()[widx];
                            let mut acc = 0.0;
                            for (j, &gv) in grow.iter().enumerate() {
                                let xi = c * t + j * stride + l * dilation;
                                acc += gv * tx.data()[xi];
                                gx[xi] += gv * wv;
                            }
                            gw[widx] += acc;
                        }
                    }
                }
                accumulate(grads, *x, Tensor::new(tx.shape().to_vec(), gx)?);
                accumulate(grads, *w, Tensor::new(tw.shape().to_vec(), gw)?);
            }
            Op::Pool { x, n, kind, picks } => {
                let tx = val(*x);
                let mut gx = vec![0.0; tx.len()];
                for (j, &p) in picks.iter().enumerate() {
                    let gv = g.data()[j];
                    match kind {
                        PoolKind::Decimate | PoolKind::Max => gx[p] += gv,
                        PoolKind::Average => {
                            for k in 0..*n {
                                gx[p + k] += gv / *n as f64;
                            }
                        }
                    }
                }
                accumulate(grads, *x, Tensor::new(tx.shape().to_vec(), gx)?);
            }
        }
        Ok(())
    }
}

fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(existing) => existing.axpy(1.0, &g),
        slot @ None => *slot = Some(g),
    }
}

fn op_inputs(op: &Op) -> Vec<Var> {
    match op {
        Op::Leaf => vec![],
        Op::Add(a, b) | Op::Sub(a, b) | Op::Mul(a, b) | Op::Div(a, b) | Op::MatMul(a, b) => {
            vec![*a, *b]
        }
        Op::Conv1d { x, w, .. } => vec![*x, *w],
        Op::Concat(parts, _) => parts.clone(),
        Op::Neg(a)
        | Op::Scale(a, _)
        | Op::AddScalar(a)
        | Op::Transpose(a)
        | Op::Reshape(a)
        | Op::Sum(a)
        | Op::SumAxis(a, _)
        | Op::Max(a, _)
        | Op::MaxAxis(a, _)
        | Op::Act(a, _)
        | Op::Softmax(a, _)
        | Op::LogSoftmax(a, _)
        | Op::Log(a)
        | Op::Exp(a)
        | Op::Sqrt(a)
        | Op::Abs(a)
        | Op::Huber(a, _)
        | Op::Clamp(a, _, _)
        | Op::Pow(a, _)
        | Op::Inverse(a) => vec![*a],
        Op::Slice { x, .. } | Op::Pool { x, .. } => vec![*x],
    }
}

/// Softmax (or log-softmax) of `t` along `axis`.
pub fn softmax_along(t: &Tensor, axis: usize, log: bool) -> Tensor {
    let (outer, e, inner) = axis_split(t.shape(), axis);
    let mut data = vec![0.0; t.len()];
    for o in 0..outer {
        for ii in 0..inner {
            let idx = |k: usize| (o * e + k) * inner + ii;
            let m = (0..e).map(|k| t.data()[idx(k)]).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = (0..e).map(|k| (t.data()[idx(k)] - m).exp()).sum();
            for k in 0..e {
                let s = t.data()[idx(k)] - m;
                data[idx(k)] = if log { s - z.ln() } else { s.exp() / z };
            }
        }
    }
    Tensor::new(t.shape().to_vec(), data).expect("same shape")
}
