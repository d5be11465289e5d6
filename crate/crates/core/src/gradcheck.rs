//! Central finite-difference verification of reverse-mode gradients.
//!
//! [`check`] compares the tape gradient of a scalar function against
//! `(f(x + h) - f(x - h)) / 2h` for every input element. [`suite`] runs that
//! comparison over every primitive, layer and loss of this crate.

use rand::Rng;

use crate::error::Result;
use crate::layers::{
    Attention, CellKind, Conv1d, ConvSpec, Dense, HeadKind, Mlp, OutputHead, Pooling,
    PoolingHead, RecurrentCell,
};
use crate::losses::{self, ClassificationKind, ClusteringVariant, MocoDictionary, NtXent};
use crate::norm::{Mode, NormKind, NormState};
use crate::params::{Bound, ParamStore};
use crate::rng::{self, Rng as Chacha};
use crate::tape::{Activation, PoolKind, Tape, Var};
use crate::tensor::Tensor;

pub const STEP: f64 = 1e-6;
pub const TOLERANCE: f64 = 1e-5;

#[derive(Clone, Debug)]
pub struct CheckResult {
    pub name: String,
    pub rel_error: f64,
    pub passed: bool,
}

/// `||a - n|| / max(||a||, ||n||, 1e-8)`.
pub fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let diff: f64 = analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).powi(2))
        .sum::<f64>()
        .sqrt();
    let na = analytic.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nn = numeric.iter().map(|n| n * n).sum::<f64>().sqrt();
    diff / na.max(nn).max(1e-8)
}

fn evaluate<F>(f: &F, inputs: &[Tensor]) -> Result<f64>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars = inputs
        .iter()
        .map(|t| tape.leaf(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut tape, &vars)?;
    Ok(tape.value(out).item())
}

/// Analytic and numeric gradients of `f` with respect to all inputs,
/// flattened in input order.
pub fn gradients<F>(inputs: &[Tensor], f: F, h: f64) -> Result<(Vec<f64>, Vec<f64>)>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars = inputs
        .iter()
        .map(|t| tape.leaf(t.clone()))
        .collect::<Result<Vec<_>>>()?;
    let out = f(&mut tape, &vars)?;
    let grads = tape.backward(out)?;
    let analytic: Vec<f64> = vars
        .iter()
        .flat_map(|&v| grads.wrt(v).into_data())
        .collect();

    let mut numeric = Vec::with_capacity(analytic.len());
    let mut work = inputs.to_vec();
    for k in 0..work.len() {
        for i in 0..work[k].len() {
            let orig = work[k].data()[i];
            work[k].data_mut()[i] = orig + h;
            let up = evaluate(&f, &work)?;
            work[k].data_mut()[i] = orig - h;
            let down = evaluate(&f, &work)?;
            work[k].data_mut()[i] = orig;
            numeric.push((up - down) / (2.0 * h));
        }
    }
    Ok((analytic, numeric))
}

/// Compare tape and finite-difference gradients with the default step and
/// tolerance.
pub fn check<F>(name: &str, inputs: &[Tensor], f: F) -> Result<CheckResult>
where
    F: Fn(&mut Tape, &[Var]) -> Result<Var>,
{
    let (a, n) = gradients(inputs, f, STEP)?;
    let rel_error = relative_error(&a, &n);
    Ok(CheckResult {
        name: name.to_string(),
        rel_error,
        passed: rel_error < TOLERANCE,
    })
}

/// Fixed, nonuniform weights that turn any output into a scalar.
fn probe(tape: &mut Tape, out: Var) -> Result<Var> {
    let t = tape.value(out);
    let w = Tensor::new(
        t.shape().to_vec(),
        (0..t.len()).map(|i| (0.37 * i as f64 + 0.1).cos() + 0.2).collect(),
    )?;
    let w = tape.leaf(w)?;
    let p = tape.mul(out, w)?;
    tape.sum(p)
}

/// Values with magnitude in `[0.2, 1]` and random sign, so kinks at zero
/// stay far from the finite-difference stencil.
fn signed(shape: &[usize], rng: &mut Chacha) -> Tensor {
    let mut t = Tensor::zeros(shape.to_vec());
    for v in t.data_mut() {
        let m: f64 = rng.random_range(0.2..1.0);
        *v = if rng.random::<bool>() { m } else { -m };
    }
    t
}

fn uniform(shape: &[usize], lo: f64, hi: f64, rng: &mut Chacha) -> Tensor {
    Tensor::uniform(shape.to_vec(), lo, hi, rng)
}

fn one_hot_columns(classes: usize, batch: usize, rng: &mut Chacha) -> Tensor {
    let mut t = Tensor::zeros(vec![classes, batch]);
    for b in 0..batch {
        t.set(rng.random_range(0..classes), b, 1.0);
    }
    t
}

type Case = (String, Vec<Tensor>, Box<dyn Fn(&mut Tape, &[Var]) -> Result<Var>>);

fn case(
    name: &str,
    inputs: Vec<Tensor>,
    f: impl Fn(&mut Tape, &[Var]) -> Result<Var> + 'static,
) -> Case {
    (name.to_string(), inputs, Box::new(f))
}

fn primitive_cases(r: &mut Chacha) -> Vec<Case> {
    let mut c = Vec::new();
    c.push(case("add (broadcast)", vec![signed(&[3, 2], r), signed(&[1, 2], r)], |t, v| {
        let o = t.add(v[0], v[1])?;
        probe(t, o)
    }));
    c.push(case("sub (broadcast)", vec![signed(&[3, 2], r), signed(&[3, 1], r)], |t, v| {
        let o = t.sub(v[0], v[1])?;
        probe(t, o)
    }));
    c.push(case("mul", vec![signed(&[2, 3], r), signed(&[2, 3], r)], |t, v| {
        let o = t.mul(v[0], v[1])?;
        probe(t, o)
    }));
    c.push(case("div", vec![signed(&[2, 3], r), uniform(&[2, 3], 0.5, 2.0, r)], |t, v| {
        let o = t.div(v[0], v[1])?;
        probe(t, o)
    }));
    c.push(case("neg, scale, add_scalar", vec![signed(&[4], r)], |t, v| {
        let o = t.neg(v[0])?;
        let o = t.scale(o, 1.7)?;
        let o = t.add_scalar(o, 0.3)?;
        probe(t, o)
    }));
    c.push(case("matmul", vec![signed(&[3, 4], r), signed(&[4, 2], r)], |t, v| {
        let o = t.matmul(v[0], v[1])?;
        probe(t, o)
    }));
    c.push(case("transpose, reshape", vec![signed(&[2, 3], r)], |t, v| {
        let o = t.transpose(v[0])?;
        let o = t.reshape(o, vec![6])?;
        probe(t, o)
    }));
    c.push(case("concat", vec![signed(&[2, 3], r), signed(&[1, 3], r), signed(&[3, 2], r)], |t, v| {
        let a = t.concat(&[v[0], v[1]], 0)?;
        let b = t.transpose(v[2])?;
        let o = t.concat(&[a, b], 0)?;
        let o2 = t.concat(&[o, o], 1)?;
        probe(t, o2)
    }));
    c.push(case("slice", vec![signed(&[4, 5], r)], |t, v| {
        let o = t.slice(v[0], 1, 1, 3)?;
        let o = t.slice(o, 0, 2, 2)?;
        probe(t, o)
    }));
    c.push(case("sum, mean", vec![signed(&[3, 4], r)], |t, v| {
        let a = t.sum_axis(v[0], 1)?;
        let b = t.mean_axis(v[0], 0)?;
        let a = probe(t, a)?;
        let b = probe(t, b)?;
        let m = t.mean(v[0])?;
        let s = t.add(a, b)?;
        t.add(s, m)
    }));
    c.push(case("max", vec![signed(&[3, 4], r)], |t, v| {
        let a = t.max_axis(v[0], 0)?;
        let a = probe(t, a)?;
        let m = t.max(v[0])?;
        t.add(a, m)
    }));
    for (name, act) in [
        ("sigmoid", Activation::Sigmoid),
        ("relu", Activation::Relu),
        ("leaky_relu", Activation::LeakyRelu(0.1)),
        ("swish", Activation::Swish),
        ("tanh", Activation::Tanh),
    ] {
        c.push(case(name, vec![signed(&[2, 3], r)], move |t, v| {
            let o = t.activate(v[0], act)?;
            probe(t, o)
        }));
    }
    c.push(case("softmax", vec![signed(&[3, 4], r)], |t, v| {
        let a = t.softmax(v[0], 0)?;
        let b = t.softmax(v[0], 1)?;
        let s = t.add(a, b)?;
        probe(t, s)
    }));
    c.push(case("log_softmax", vec![signed(&[3, 4], r)], |t, v| {
        let o = t.log_softmax(v[0], 1)?;
        probe(t, o)
    }));
    c.push(case("log, exp, sqrt", vec![uniform(&[5], 0.3, 2.0, r)], |t, v| {
        let a = t.log(v[0])?;
        let b = t.exp(v[0])?;
        let s = t.sqrt(v[0])?;
        let o = t.add(a, b)?;
        let o = t.add(o, s)?;
        probe(t, o)
    }));
    c.push(case("abs, square", vec![signed(&[5], r)], |t, v| {
        let a = t.abs(v[0])?;
        let b = t.square(v[0])?;
        let o = t.add(a, b)?;
        probe(t, o)
    }));
    c.push(case("huber", vec![signed(&[6], r)], |t, v| {
        let o = t.huber(v[0], 0.55)?;
        probe(t, o)
    }));
    c.push(case("clamp", vec![uniform(&[6], -2.0, 2.0, r)], |t, v| {
        let o = t.clamp(v[0], -2.5, 2.5)?;
        probe(t, o)
    }));
    c.push(case("pow", vec![uniform(&[5], 0.2, 1.5, r)], |t, v| {
        let o = t.pow(v[0], 1.7)?;
        probe(t, o)
    }));
    let mut m = signed(&[3, 3], r).scale(0.3);
    for i in 0..3 {
        m.set(i, i, m.at(i, i) + 2.0);
    }
    c.push(case("inverse", vec![m], |t, v| {
        let o = t.inverse(v[0])?;
        probe(t, o)
    }));
    c.push(case("conv1d", vec![signed(&[2, 11], r), signed(&[3, 2, 3], r)], |t, v| {
        let o = t.conv1d(v[0], v[1], 2, 2)?;
        probe(t, o)
    }));
    for (name, kind) in [
        ("pool1d average", PoolKind::Average),
        ("pool1d max", PoolKind::Max),
        ("pool1d decimate", PoolKind::Decimate),
    ] {
        c.push(case(name, vec![signed(&[2, 9], r)], move |t, v| {
            let o = t.pool1d(v[0], 3, kind)?;
            probe(t, o)
        }));
    }
    c
}

/// Layer case: input `x` followed by every parameter of `store`.
fn layer_case(
    name: &str,
    x: Tensor,
    store: &ParamStore,
    f: impl Fn(&mut Tape, &Bound, Var) -> Result<Var> + 'static,
) -> Case {
    let mut inputs = vec![x];
    inputs.extend(store.tensors().iter().cloned());
    case(name, inputs, move |t, v| {
        let p = Bound::from_vars(v[1..].to_vec());
        let o = f(t, &p, v[0])?;
        probe(t, o)
    })
}

fn randomize(store: &mut ParamStore, r: &mut Chacha) {
    for t in store.tensors_mut() {
        *t = signed(t.shape(), r).scale(0.5);
    }
}

fn layer_cases(r: &mut Chacha) -> Result<Vec<Case>> {
    let mut c = Vec::new();

    let mut s = ParamStore::new();
    let d = Dense::new(&mut s, 3, 4, Activation::Tanh, r);
    randomize(&mut s, r);
    c.push(layer_case("dense", signed(&[3, 2], r), &s, move |t, p, x| d.forward(t, p, x)));

    let mut s = ParamStore::new();
    let mlp = Mlp::new(&mut s, &[3, 4, 2], Activation::Sigmoid, Activation::Identity, r);
    randomize(&mut s, r);
    c.push(layer_case("mlp", signed(&[3, 2], r), &s, move |t, p, x| mlp.forward(t, p, x)));

    let mut s = ParamStore::new();
    let conv = Conv1d::new(
        &mut s,
        ConvSpec {
            in_channels: 2,
            out_channels: 3,
            width: 3,
            stride: 1,
            dilation: 2,
            pooling: Pooling::Average(2),
            act: Activation::Tanh,
        },
        r,
    )?;
    randomize(&mut s, r);
    c.push(layer_case("conv1d layer", signed(&[2, 10], r), &s, move |t, p, x| conv.forward(t, p, x)));

    for (name, kind) in [("lstm", CellKind::Lstm), ("gru", CellKind::Gru)] {
        let mut s = ParamStore::new();
        let cell = RecurrentCell::new(&mut s, kind, 3, 2, r);
        randomize(&mut s, r);
        c.push(layer_case(name, signed(&[3, 4], r), &s, move |t, p, x| {
            cell.forward_sequence(t, p, x)
        }));
    }

    let mut s = ParamStore::new();
    let att = Attention::new(&mut s, 3, 2, 2, 2, r);
    randomize(&mut s, r);
    c.push(layer_case("attention", signed(&[3, 4], r), &s, move |t, p, x| att.forward(t, p, x)));

    let mut s = ParamStore::new();
    let pool = PoolingHead::attentive(&mut s, 3, 4, Some(2), r);
    randomize(&mut s, r);
    c.push(layer_case("attentive pooling", signed(&[3, 5], r), &s, move |t, p, x| {
        pool.forward(t, p, x)
    }));

    let s = ParamStore::new();
    c.push(layer_case("stats pooling", signed(&[3, 5], r), &s, |t, p, x| {
        PoolingHead::Stats { eps: 1e-8 }.forward(t, p, x)
    }));

    for (name, kind) in [("layer norm", NormKind::Layer), ("batch norm", NormKind::Batch)] {
        let mut s = ParamStore::new();
        let norm = NormState::new(&mut s, kind, 3, 1e-5);
        randomize(&mut s, r);
        c.push(layer_case(name, signed(&[3, 4], r), &s, move |t, p, x| {
            norm.clone().forward(t, p, x, Mode::Train)
        }));
    }

    let mut s = ParamStore::new();
    let inner = Dense::new(&mut s, 3, 3, Activation::Tanh, r);
    randomize(&mut s, r);
    c.push(layer_case("residual", signed(&[3, 2], r), &s, move |t, p, x| {
        crate::layers::residual(t, x, |t, v| inner.forward(t, p, v))
    }));

    for (name, kind) in [
        ("softmax head", HeadKind::Softmax),
        ("multi-sigmoid head", HeadKind::MultiSigmoid),
    ] {
        let mut s = ParamStore::new();
        let head = OutputHead::new(&mut s, kind, 3, 4, r);
        randomize(&mut s, r);
        c.push(layer_case(name, signed(&[3, 2], r), &s, move |t, p, x| head.forward(t, p, x)));
    }
    Ok(c)
}

fn loss_cases(r: &mut Chacha) -> Result<Vec<Case>> {
    use losses::RegressionKind;
    let mut c = Vec::new();

    for (name, kind) in [
        ("mse", RegressionKind::Mse),
        ("l1", RegressionKind::L1),
        ("huber", RegressionKind::Huber(0.6)),
    ] {
        c.push(case(name, vec![signed(&[3, 2], r), signed(&[3, 2], r)], move |t, v| {
            losses::regression(t, kind, v[0], v[1])
        }));
    }

    let probs = |r: &mut Chacha| uniform(&[3, 4], 0.05, 0.95, r);
    let soft = uniform(&[3, 4], 0.0, 1.0, r);
    let binary = soft.map(|v| if v > 0.5 { 1.0 } else { 0.0 });
    let kinds = [
        ("bce", ClassificationKind::Bce, soft.clone()),
        ("weighted bce", ClassificationKind::WeightedBce { beta: 3.0 }, binary.clone()),
        ("inverse frequency", ClassificationKind::InverseFrequency { c0: 1.5, eta: 0.7 }, binary.clone()),
        ("asymmetric focal", ClassificationKind::AsymmetricFocal { eta: 1.5 }, binary.clone()),
        ("dice", ClassificationKind::Dice { kappa0: 0.1, alpha: 0.3, eta: 1.5 }, binary.clone()),
    ];
    for (name, kind, y) in kinds {
        c.push(case(name, vec![probs(r)], move |t, v| losses::classification(t, kind, &y, v[0])));
    }
    let y = one_hot_columns(3, 4, r);
    let y2 = y.clone();
    c.push(case("cross-entropy", vec![signed(&[3, 4], r)], move |t, v| {
        let p = t.softmax(v[0], 0)?;
        losses::classification(t, ClassificationKind::CrossEntropy, &y, p)
    }));
    c.push(case("nll", vec![signed(&[3, 4], r)], move |t, v| {
        let p = t.softmax(v[0], 0)?;
        losses::classification(t, ClassificationKind::Nll, &y2, p)
    }));

    let labels = Tensor::matrix(1, 5, vec![1.0, -1.0, 1.0, -1.0, 1.0])?;
    c.push(case(
        "hinge svm",
        vec![signed(&[1, 3], r).scale(0.6), signed(&[3, 5], r), signed(&[1, 1], r).scale(0.2)],
        move |t, v| {
            let s = t.matmul(v[0], v[1])?;
            let s = t.add(s, v[2])?;
            losses::hinge_svm(t, &labels, s, v[0], 0.1)
        },
    ));

    let clip = Tensor::matrix(2, 2, vec![1.0, 0.0, 0.0, 1.0])?;
    c.push(case(
        "super-resolution",
        vec![uniform(&[2, 4], 0.05, 0.95, r), uniform(&[2, 3], 0.05, 0.95, r)],
        move |t, v| losses::super_resolution(t, &[v[0], v[1]], &clip),
    ));

    c.push(case("contrastive", vec![signed(&[3, 4], r), signed(&[3, 4], r)], |t, v| {
        losses::contrastive(t, v[0], v[1], &[true, false, true, false], 2.5)
    }));
    for (name, dist) in [
        ("triplet", losses::TripletDistance::Euclidean),
        ("triplet squared", losses::TripletDistance::Squared),
    ] {
        c.push(case(
            name,
            vec![signed(&[3, 4], r), signed(&[3, 4], r), signed(&[3, 4], r)],
            move |t, v| losses::triplet(t, v[0], v[1], v[2], 5.0, dist),
        ));
    }
    c.push(case("nt-xent", vec![signed(&[3, 4], r), signed(&[3, 4], r)], |t, v| {
        losses::ntxent(t, v[0], v[1], NtXent { scale: 2.0, tau: 0.5, margin: 0.2 })
    }));
    let mut dict = MocoDictionary::new(3, 5, 0.999)?;
    dict.push(&signed(&[3, 5], r))?;
    let keys = signed(&[3, 2], r);
    c.push(case("moco", vec![signed(&[3, 2], r)], move |t, v| {
        losses::moco(t, v[0], &keys, &dict, 0.7)
    }));

    let targets = signed(&[6, 2], r);
    let tg = targets.clone();
    c.push(case("si-sdr", vec![signed(&[6, 2], r)], move |t, v| {
        losses::si_sdr_loss(t, &tg, v[0])
    }));
    let mix = uniform(&[3, 4], 0.1, 2.0, r);
    let tgt = uniform(&[3, 4], 0.1, 2.0, r);
    c.push(case("spectral distance", vec![uniform(&[3, 4], 0.0, 1.0, r)], move |t, v| {
        losses::spectral_distance(t, v[0], &mix, &tgt)
    }));
    let refs = signed(&[5, 2], r);
    c.push(case("pit", vec![signed(&[5, 2], r)], move |t, v| {
        let mut d = Vec::new();
        for j in 0..2 {
            let mut row = Vec::new();
            for i in 0..2 {
                let est = t.slice(v[0], 1, i, 1)?;
                let rf = t.leaf(Tensor::column(refs.col(j)))?;
                row.push(losses::regression(t, RegressionKind::Mse, rf, est)?);
            }
            d.push(row);
        }
        Ok(losses::pit_select(t, &d)?.0)
    }));
    let u = one_hot_columns(2, 6, r);
    let u2 = u.clone();
    c.push(case("deep clustering frobenius", vec![signed(&[3, 6], r)], move |t, v| {
        losses::deep_clustering(t, v[0], &u, ClusteringVariant::Frobenius)
    }));
    c.push(case("deep clustering trace", vec![signed(&[2, 6], r)], move |t, v| {
        losses::deep_clustering(t, v[0], &u2, ClusteringVariant::Trace)
    }));

    let mut s = ParamStore::new();
    let g = Mlp::new(&mut s, &[3, 4, 2], Activation::Tanh, Activation::Identity, r);
    let params = s.tensors().to_vec();
    let np = params.len();
    let mut inputs = vec![signed(&[3, 2], r), signed(&[3, 2], r)];
    inputs.extend(params);
    c.push(case("feature constraint", inputs, move |t, v| {
        let p = Bound::from_vars(v[2..2 + np].to_vec());
        let a = g.forward_all(t, &p, v[0])?;
        let b = g.forward_all(t, &p, v[1])?;
        losses::feature_constraint(t, &a, &b, Some(&[0.5, 2.0]))
    }));

    c.push(case("auc surrogate", vec![signed(&[5], r), signed(&[4], r)], |t, v| {
        losses::auc_surrogate(t, v[0], v[1])
    }));
    Ok(c)
}

/// Every primitive, layer and loss check for one seed.
pub fn suite(seed: u64) -> Result<Vec<CheckResult>> {
    let mut r = rng::stream(seed, 0x67c);
    let mut cases = primitive_cases(&mut r);
    cases.extend(layer_cases(&mut r)?);
    cases.extend(loss_cases(&mut r)?);
    cases
        .into_iter()
        .map(|(name, inputs, f)| check(&name, &inputs, f))
        .collect()
}
