//! Locally linear embedding.

use nalgebra::{DMatrix, DVector};

use crate::embed::EmbeddingResult;
use crate::error::{invalid, Result, TransformError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum LleWeights {
    /// Least-squares `h = (N^T N + eps I)^-1 N^T x` over neighbour columns.
    Unconstrained,
    /// Affine weights `h = G^-1 1 / (1^T G^-1 1)` with `G` the local Gram
    /// matrix of differences; the constant embedding vector is dropped.
    #[default]
    Constrained,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LleConfig {
    pub neighbors: usize,
    pub ridge: f64,
    pub dims: usize,
    pub weights: LleWeights,
}

/// Neighbour indices and reconstruction weights per point.
#[derive(Clone, Debug, PartialEq)]
pub struct LocalWeights {
    pub neighbors: Vec<Vec<usize>>,
    pub weights: Vec<DVector<f64>>,
    /// `[N, N]`; column `n` holds the weights of point `n`.
    pub matrix: DMatrix<f64>,
}

fn nearest(x: &DMatrix<f64>, n: usize, k: usize) -> Vec<usize> {
    let mut others: Vec<(f64, usize)> = (0..x.nrows())
        .filter(|&j| j != n)
        .map(|j| ((x.row(n) - x.row(j)).norm_squared(), j))
        .collect();
    others.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    others.into_iter().take(k).map(|(_, j)| j).collect()
}

/// Reconstruction weights for samples given as rows of `x`.
pub fn lle_weights(x: &DMatrix<f64>, cfg: &LleConfig) -> Result<LocalWeights> {
    let n = x.nrows();
    if cfg.neighbors == 0 || cfg.neighbors >= n {
        return Err(invalid("lle", format!("neighbors must be in 1..{n}")));
    }
    if !(cfg.ridge >= 0.0) {
        return Err(invalid("lle", "ridge must be nonnegative"));
    }
    let k = cfg.neighbors;
    let mut all_nb = Vec::with_capacity(n);
    let mut all_w = Vec::with_capacity(n);
    let mut matrix = DMatrix::zeros(n, n);
    for i in 0..n {
        let nb = nearest(x, i, k);
        let xi = x.row(i).transpose();
        let cols = DMatrix::from_fn(x.ncols(), k, |r, c| x[(nb[c], r)]);
        let w = match cfg.weights {
            LleWeights::Unconstrained => {
                let g = cols.transpose() * &cols + DMatrix::identity(k, k) * cfg.ridge;
                let chol = g.cholesky().ok_or(TransformError::Singular { op: "lle" })?;
                chol.solve(&(cols.transpose() * &xi))
            }
            LleWeights::Constrained => {
                let diff = DMatrix::from_fn(x.ncols(), k, |r, c| xi[r] - cols[(r, c)]);
                let g = diff.transpose() * &diff + DMatrix::identity(k, k) * cfg.ridge;
                let chol = g.cholesky().ok_or(TransformError::Singular { op: "lle" })?;
                let s = chol.solve(&DVector::from_element(k, 1.0));
                let total = s.sum();
                if total == 0.0 || !total.is_finite() {
                    return Err(TransformError::Singular { op: "lle" });
                }
                s / total
            }
        };
        for (c, &j) in nb.iter().enumerate() {
            matrix[(j, i)] = w[c];
        }
        all_nb.push(nb);
        all_w.push(w);
    }
    Ok(LocalWeights {
        neighbors: all_nb,
        weights: all_w,
        matrix,
    })
}

/// `tr(Y (I - H)(I - H)^T Y^T)` for coordinates `y` `[L, N]`.
pub fn lle_objective(y: &DMatrix<f64>, h: &DMatrix<f64>) -> f64 {
    let n = h.nrows();
    let r = DMatrix::<f64>::identity(n, n) - h;
    (y * &r * r.transpose() * y.transpose()).trace()
}

pub fn lle_embed(x: &DMatrix<f64>, cfg: &LleConfig) -> Result<EmbeddingResult> {
    let n = x.nrows();
    let skip = usize::from(cfg.weights == LleWeights::Constrained);
    if cfg.dims == 0 || cfg.dims + skip > n {
        return Err(invalid("lle", format!("dims {} too large for {n} points", cfg.dims)));
    }
    let local = lle_weights(x, cfg)?;
    let r = DMatrix::<f64>::identity(n, n) - &local.matrix;
    let m = &r * r.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let eig = m.symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut coords = DMatrix::zeros(cfg.dims, n);
    for (row, &i) in order.iter().skip(skip).take(cfg.dims).enumerate() {
        coords.set_row(row, &eig.eigenvectors.column(i).transpose());
    }
    let value = lle_objective(&coords, &local.matrix);
    Ok(EmbeddingResult {
        coords,
        history: vec![value],
        method: "lle",
        padded: false,
    })
}
