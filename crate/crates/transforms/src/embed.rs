use nalgebra::DMatrix;

/// Low-dimensional coordinates with per-method diagnostics.
#[derive(Clone, Debug, PartialEq)]
pub struct EmbeddingResult {
    /// `[L, N]`: one column per point.
    pub coords: DMatrix<f64>,
    /// Objective value per iteration (one entry for closed-form methods).
    pub history: Vec<f64>,
    pub method: &'static str,
    /// Rows past the available spectrum were filled with zeros.
    pub padded: bool,
}

impl EmbeddingResult {
    pub fn dims(&self) -> usize {
        self.coords.nrows()
    }

    pub fn points(&self) -> usize {
        self.coords.ncols()
    }

    pub fn point(&self, n: usize) -> Vec<f64> {
        self.coords.column(n).iter().copied().collect()
    }
}

/// Squared Euclidean distances between the rows of `x`.
pub fn squared_distances(x: &DMatrix<f64>) -> DMatrix<f64> {
    let n = x.nrows();
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            (x.row(i) - x.row(j)).norm_squared()
        }
    })
}

/// Mean silhouette of a labelled point set given as columns of `y`.
pub fn silhouette(y: &DMatrix<f64>, labels: &[usize]) -> f64 {
    let n = y.ncols();
    let classes = labels.iter().copied().max().map_or(0, |m| m + 1);
    let mut total = 0.0;
    for i in 0..n {
        let mut sums = vec![0.0; classes];
        let mut counts = vec![0usize; classes];
        for j in 0..n {
            if i != j {
                sums[labels[j]] += (y.column(i) - y.column(j)).norm();
                counts[labels[j]] += 1;
            }
        }
        let own = labels[i];
        if counts[own] == 0 {
            continue;
        }
        let a = sums[own] / counts[own] as f64;
        let b = (0..classes)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| sums[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        if b.is_finite() {
            total += (b - a) / a.max(b);
        }
    }
    total / n as f64
}
