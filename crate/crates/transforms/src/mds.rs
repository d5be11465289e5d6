//! Classical multidimensional scaling.

use nalgebra::DMatrix;

use crate::embed::EmbeddingResult;
use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum GramForm {
    /// `-1/2 Q D Q`, the inner-product matrix of centred points.
    #[default]
    Centered,
    /// `Q D Q` with no factor; kept for comparison, its positive spectrum is
    /// empty on Euclidean distances.
    Unscaled,
}

/// Double-centred Gram matrix of squared distances.
pub fn gram(d: &DMatrix<f64>, form: GramForm) -> DMatrix<f64> {
    let n = d.nrows();
    let q = DMatrix::identity(n, n) - DMatrix::from_element(n, n, 1.0 / n as f64);
    let b = &q * d * &q;
    match form {
        GramForm::Centered => b * -0.5,
        GramForm::Unscaled => b,
    }
}

/// Embed from squared distances into `dims` rows; negative eigenvalues are
/// truncated at zero.
pub fn mds_embed(d: &DMatrix<f64>, dims: usize, form: GramForm) -> Result<EmbeddingResult> {
    let n = d.nrows();
    if d.ncols() != n || n < 2 {
        return Err(invalid("mds", "distance matrix must be square with two or more points"));
    }
    if dims == 0 || dims >= n {
        return Err(invalid("mds", format!("dims {dims} must be in 1..{n}")));
    }
    let scale = d.amax().max(f64::MIN_POSITIVE);
    for i in 0..n {
        if d[(i, i)].abs() > 1e-12 * scale {
            return Err(invalid("mds", "diagonal must be zero"));
        }
        for j in 0..i {
            if (d[(i, j)] - d[(j, i)]).abs() > 1e-12 * scale {
                return Err(invalid("mds", "distance matrix must be symmetric"));
            }
        }
    }
    let b = gram(d, form);
    let b = (&b + b.transpose()) * 0.5;
    let eig = b.clone().symmetric_eigen();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &c| eig.eigenvalues[c].total_cmp(&eig.eigenvalues[a]));
    let tol = 1e-12 * eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
    let mut coords = DMatrix::zeros(dims, n);
    let mut padded = false;
    for (row, &i) in order.iter().take(dims).enumerate() {
        let lambda = eig.eigenvalues[i];
        if lambda <= tol {
            padded = true;
            continue;
        }
        let s = lambda.sqrt();
        for j in 0..n {
            coords[(row, j)] = s * eig.eigenvectors[(j, i)];
        }
    }
    let fit = (&b - coords.transpose() * &coords).norm();
    Ok(EmbeddingResult {
        coords,
        history: vec![fit],
        method: "mds",
        padded,
    })
}
