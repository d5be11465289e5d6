//! Linear discriminant analysis: projections maximizing between-class
//! scatter relative to within-class scatter.

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result, TransformError};

#[derive(Clone, Debug)]
pub struct LdaModel {
    /// Projection rows, `[M, D]`, unit length, by descending eigenvalue.
    pub transform: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
    pub class_means: Vec<DVector<f64>>,
    pub within: DMatrix<f64>,
    pub between: DMatrix<f64>,
    /// Every eigenvalue is numerically zero, so any basis is optimal.
    pub degenerate: bool,
}

/// Fit on samples `x` (one row per sample) with integer class labels.
/// `ridge` is added to the within-class scatter; without it a singular
/// scatter is an error.
pub fn lda_fit(x: &DMatrix<f64>, labels: &[usize], dims: usize, ridge: Option<f64>) -> Result<LdaModel> {
    let (n, d) = x.shape();
    if labels.len() != n {
        return Err(invalid("lda", "one label per sample required"));
    }
    if dims == 0 || dims > d {
        return Err(invalid("lda", format!("dims {dims} not in 1..={d}")));
    }
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut counts = vec![0usize; classes];
    for &l in labels {
        counts[l] += 1;
    }
    let present: Vec<usize> = (0..classes).filter(|&c| counts[c] > 0).collect();
    if present.len() < 2 || present.iter().any(|&c| counts[c] < 2) {
        return Err(invalid("lda", "need two or more classes with at least two samples each"));
    }
    let mean = x.row_mean().transpose();
    let mut class_means = vec![DVector::zeros(d); classes];
    for (i, &l) in labels.iter().enumerate() {
        class_means[l] += x.row(i).transpose();
    }
    for &c in &present {
        class_means[c] /= counts[c] as f64;
    }
    let mut within = DMatrix::zeros(d, d);
    for (i, &l) in labels.iter().enumerate() {
        let e = x.row(i).transpose() - &class_means[l];
        within += &e * e.transpose();
    }
    let mut between = DMatrix::zeros(d, d);
    for &c in &present {
        let e = &class_means[c] - &mean;
        between += (&e * e.transpose()) * counts[c] as f64;
    }
    let sw = match ridge {
        Some(r) if r > 0.0 => &within + DMatrix::identity(d, d) * r,
        _ => within.clone(),
    };
    let chol = sw
        .clone()
        .cholesky()
        .ok_or(TransformError::Singular { op: "lda" })?;
    // Scatter ratios are unchanged by the symmetric form L^-1 Sb L^-T, whose
    // eigenvectors v map back through a = L^-T v.
    let l = chol.l();
    let linv = l
        .clone()
        .try_inverse()
        .ok_or(TransformError::Singular { op: "lda" })?;
    let sym = &linv * &between * linv.transpose();
    let sym = (&sym + sym.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let mut transform = DMatrix::zeros(dims, d);
    let mut eigenvalues = Vec::with_capacity(dims);
    for (row, &i) in order.iter().take(dims).enumerate() {
        let a = linv.transpose() * eig.eigenvectors.column(i);
        let a = &a / a.norm();
        transform.set_row(row, &a.transpose());
        eigenvalues.push(eig.eigenvalues[i]);
    }
    let scale = between.norm().max(within.norm()).max(f64::MIN_POSITIVE);
    let degenerate = eig.eigenvalues.iter().all(|v| v.abs() <= 1e-12 * scale);
    Ok(LdaModel {
        transform,
        eigenvalues,
        class_means,
        within,
        between,
        degenerate,
    })
}

impl LdaModel {
    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.transform * x
    }

    /// `tr(A Sb A^T) / tr(A Sw A^T)` for any projection `A`.
    pub fn ratio(&self, a: &DMatrix<f64>) -> f64 {
        let num = (a * &self.between * a.transpose()).trace();
        let den = (a * &self.within * a.transpose()).trace();
        num / den
    }
}
