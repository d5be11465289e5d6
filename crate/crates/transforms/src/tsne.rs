//! t-distributed stochastic neighbour embedding over conditional
//! affinities.

use nalgebra::DMatrix;
use rand::Rng;

use acoustic_core::rng::normal;

use crate::embed::EmbeddingResult;
use crate::error::{invalid, Result, TransformError};

/// How the Gaussian width of each point is chosen.
#[derive(Clone, Debug, PartialEq)]
pub enum Bandwidth {
    /// Binary search per point until the conditional has this perplexity.
    Perplexity(f64),
    /// One width per point.
    Fixed(Vec<f64>),
}

/// Low-dimensional affinity model.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TsneObjective {
    /// `q_{k|n}` is the t kernel normalised over `k != n`, giving attraction
    /// and repulsion.
    #[default]
    Normalized,
    /// `q` is the unnormalised t density; only the attractive term remains
    /// and points drift together. The objective omits the density constant.
    Density,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TsneConfig {
    pub dims: usize,
    /// Degrees of freedom of the t kernel; 1 gives the Cauchy kernel.
    pub dof: f64,
    pub bandwidth: Bandwidth,
    pub iterations: usize,
    pub step: f64,
    pub momentum: f64,
    /// Standard deviation of the random initial coordinates.
    pub init_std: f64,
    pub objective: TsneObjective,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            dims: 2,
            dof: 1.0,
            bandwidth: Bandwidth::Perplexity(5.0),
            iterations: 500,
            step: 1.0,
            momentum: 0.5,
            init_std: 1e-2,
            objective: TsneObjective::Normalized,
        }
    }
}

fn conditional_column(d: &DMatrix<f64>, n: usize, beta: f64) -> (Vec<f64>, f64) {
    let count = d.nrows();
    let shift = (0..count)
        .filter(|&k| k != n)
        .map(|k| d[(k, n)])
        .fold(f64::INFINITY, f64::min);
    let mut col = vec![0.0; count];
    let mut total = 0.0;
    for k in (0..count).filter(|&k| k != n) {
        col[k] = (-(d[(k, n)] - shift) * beta).exp();
        total += col[k];
    }
    let mut entropy = 0.0;
    for v in &mut col {
        *v /= total;
        if *v > 0.0 {
            entropy -= *v * v.ln();
        }
    }
    (col, entropy)
}

fn search_beta(d: &DMatrix<f64>, n: usize, target: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, f64::INFINITY);
    let mut beta = 1.0;
    for _ in 0..200 {
        let (_, h) = conditional_column(d, n, beta);
        if (h - target).abs() < 1e-10 {
            break;
        }
        if h > target {
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (lo + hi);
        }
    }
    beta
}

/// Gaussian conditionals `P[(k, n)] = p_{k|n}` from squared distances; each
/// column sums to one and the diagonal is zero.
pub fn conditional_affinities(d: &DMatrix<f64>, bandwidth: &Bandwidth) -> Result<DMatrix<f64>> {
    let n = d.nrows();
    if d.ncols() != n || n < 2 {
        return Err(invalid("tsne", "distance matrix must be square with two or more points"));
    }
    let mut p = DMatrix::zeros(n, n);
    for i in 0..n {
        let beta = match bandwidth {
            Bandwidth::Fixed(sigmas) => {
                let s = *sigmas
                    .get(i)
                    .ok_or_else(|| invalid("tsne", "one width per point required"))?;
                if !(s > 0.0) {
                    return Err(invalid("tsne", "widths must be positive"));
                }
                1.0 / (2.0 * s * s)
            }
            Bandwidth::Perplexity(perp) => {
                if !(*perp > 1.0) || *perp > (n - 1) as f64 {
                    return Err(invalid("tsne", format!("perplexity must be in (1, {}]", n - 1)));
                }
                search_beta(d, i, perp.ln())
            }
        };
        let (col, _) = conditional_column(d, i, beta);
        for (k, v) in col.into_iter().enumerate() {
            p[(k, i)] = v;
        }
    }
    Ok(p)
}

/// `(1 + t^2 / dof)^{-1}` between columns of `y`, zero on the diagonal.
fn inverse_kernel(y: &DMatrix<f64>, dof: f64) -> DMatrix<f64> {
    let n = y.ncols();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            1.0 / (1.0 + (y.column(i) - y.column(j)).norm_squared() / dof)
        }
    })
}

fn t_kernel(y: &DMatrix<f64>, dof: f64) -> DMatrix<f64> {
    inverse_kernel(y, dof).map(|v| if v == 0.0 { 0.0 } else { v.powf(0.5 * (dof + 1.0)) })
}

/// Normalised low-dimensional conditionals `Q[(k, n)] = q_{k|n}`.
pub fn low_conditionals(y: &DMatrix<f64>, dof: f64) -> DMatrix<f64> {
    let mut w = t_kernel(y, dof);
    for mut col in w.column_iter_mut() {
        let total = col.sum();
        col /= total;
    }
    w
}

/// `sum_n sum_k p_{k|n} ln(p_{k|n} / q_{k|n})`.
pub fn tsne_objective(p: &DMatrix<f64>, y: &DMatrix<f64>, dof: f64, objective: TsneObjective) -> f64 {
    let n = p.nrows();
    let q = match objective {
        TsneObjective::Normalized => low_conditionals(y, dof),
        TsneObjective::Density => t_kernel(y, dof),
    };
    let mut total = 0.0;
    for i in 0..n {
        for k in 0..n {
            let pk = p[(k, i)];
            if k != i && pk > 0.0 {
                total += pk * (pk / q[(k, i)]).ln();
            }
        }
    }
    total
}

/// Gradient with respect to every column of `y`.
pub fn tsne_gradient(p: &DMatrix<f64>, y: &DMatrix<f64>, dof: f64, objective: TsneObjective) -> DMatrix<f64> {
    let n = y.ncols();
    let u = inverse_kernel(y, dof);
    let q = match objective {
        TsneObjective::Normalized => Some(low_conditionals(y, dof)),
        TsneObjective::Density => None,
    };
    let coef = (dof + 1.0) / dof;
    let mut g = DMatrix::zeros(y.nrows(), n);
    for m in 0..n {
        for j in (0..n).filter(|&j| j != m) {
            let mut w = p[(m, j)] + p[(j, m)];
            if let Some(q) = &q {
                w -= q[(m, j)] + q[(j, m)];
            }
            let scale = coef * w * u[(m, j)];
            for r in 0..y.nrows() {
                g[(r, m)] += scale * (y[(r, m)] - y[(r, j)]);
            }
        }
    }
    g
}

/// Embed from squared distances by gradient descent with momentum.
pub fn tsne_embed<R: Rng + ?Sized>(d: &DMatrix<f64>, cfg: &TsneConfig, rng: &mut R) -> Result<EmbeddingResult> {
    let n = d.nrows();
    if !(cfg.dof > 0.0) {
        return Err(invalid("tsne", "degrees of freedom must be positive"));
    }
    if cfg.dims == 0 || cfg.dims >= n {
        return Err(invalid("tsne", format!("dims {} must be in 1..{n}", cfg.dims)));
    }
    let p = conditional_affinities(d, &cfg.bandwidth)?;
    let mut y = DMatrix::from_fn(cfg.dims, n, |_, _| cfg.init_std * normal(rng));
    let mut prev = y.clone();
    let mut history = Vec::with_capacity(cfg.iterations + 1);
    for it in 0..=cfg.iterations {
        let value = tsne_objective(&p, &y, cfg.dof, cfg.objective);
        if !value.is_finite() {
            return Err(TransformError::NonFinite { iteration: it });
        }
        history.push(value);
        if it == cfg.iterations {
            break;
        }
        let g = tsne_gradient(&p, &y, cfg.dof, cfg.objective);
        let next = &y - g * cfg.step + (&y - &prev) * cfg.momentum;
        if next.iter().any(|v| !v.is_finite()) {
            return Err(TransformError::NonFinite { iteration: it + 1 });
        }
        prev = std::mem::replace(&mut y, next);
    }
    Ok(EmbeddingResult {
        coords: y,
        history,
        method: "tsne",
        padded: false,
    })
}
