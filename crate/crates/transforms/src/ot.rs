//! Exact discrete optimal transport by the transportation simplex.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

use crate::error::{invalid, Result, TransformError};

/// Largest supported side of the cost matrix.
pub const MAX_SIDE: usize = 64;

/// Allowed deviation of each marginal's sum from one.
pub const SIMPLEX_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct TransportPlan {
    /// `[K, N]` nonnegative masses.
    pub plan: DMatrix<f64>,
    pub source: Vec<f64>,
    pub target: Vec<f64>,
    pub cost_matrix: DMatrix<f64>,
    /// `tr(H^T C)`.
    pub cost: f64,
}

impl TransportPlan {
    /// Largest absolute deviation of row and column sums from the marginals.
    pub fn marginal_residual(&self) -> f64 {
        let (k, n) = self.plan.shape();
        let rows = (0..k).map(|i| (self.plan.row(i).sum() - self.source[i]).abs());
        let cols = (0..n).map(|j| (self.plan.column(j).sum() - self.target[j]).abs());
        rows.chain(cols).fold(0.0, f64::max)
    }
}

fn check(c: &DMatrix<f64>, p: &[f64], q: &[f64]) -> Result<()> {
    let (k, n) = c.shape();
    if p.len() != k || q.len() != n || k == 0 || n == 0 {
        return Err(invalid("transport", "marginals do not match the cost matrix"));
    }
    if k > MAX_SIDE || n > MAX_SIDE {
        return Err(invalid("transport", format!("sizes above {MAX_SIDE} are not supported")));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(invalid("transport", "costs must be finite"));
    }
    if p.iter().chain(q).any(|&v| !(v >= 0.0) || !v.is_finite()) {
        return Err(invalid("transport", "marginals must be finite and nonnegative"));
    }
    let (sp, sq) = (p.iter().sum::<f64>(), q.iter().sum::<f64>());
    if (sp - sq).abs() > SIMPLEX_TOL {
        return Err(TransformError::Infeasible { p: sp, q: sq });
    }
    if (sp - 1.0).abs() > SIMPLEX_TOL {
        return Err(invalid("transport", format!("marginals sum to {sp}, not 1")));
    }
    Ok(())
}

/// Basis cells of a transportation tableau; rows are nodes `0..k`, columns
/// nodes `k..k+n`.
struct Basis {
    k: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
}

impl Basis {
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.k + self.n];
        for (idx, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.k + j, idx));
            adj[self.k + j].push((i, idx));
        }
        adj
    }

    /// Duals with `u_0 = 0` and `u_i + v_j = c_ij` on basic cells.
    fn potentials(&self, c: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
        let adj = self.adjacency();
        let mut val = vec![f64::NAN; self.k + self.n];
        val[0] = 0.0;
        let mut queue = VecDeque::from([0usize]);
        while let Some(node) = queue.pop_front() {
            for &(other, idx) in &adj[node] {
                if val[other].is_nan() {
                    let (i, j) = self.cells[idx];
                    val[other] = c[(i, j)] - val[node];
                    queue.push_back(other);
                }
            }
        }
        (val[..self.k].to_vec(), val[self.k..].to_vec())
    }

    /// Basis cell indices on the tree path from row node `i` to column
    /// node `j`.
    fn path(&self, i: usize, j: usize) -> Vec<usize> {
        let adj = self.adjacency();
        let total = self.k + self.n;
        let mut prev: Vec<Option<(usize, usize)>> = vec![None; total];
        let mut seen = vec![false; total];
        seen[i] = true;
        let mut queue = VecDeque::from([i]);
        let goal = self.k + j;
        while let Some(node) = queue.pop_front() {
            if node == goal {
                break;
            }
            for &(other, idx) in &adj[node] {
                if !seen[other] {
                    seen[other] = true;
                    prev[other] = Some((node, idx));
                    queue.push_back(other);
                }
            }
        }
        let mut cells = Vec::new();
        let mut node = goal;
        while let Some((p, idx)) = prev[node] {
            cells.push(idx);
            node = p;
        }
        cells.reverse();
        cells
    }

    /// Plan values implied by the tree and the marginals, found by peeling
    /// leaves.
    fn solve_values(&self, p: &[f64], q: &[f64]) -> DMatrix<f64> {
        let mut remaining: Vec<f64> = p.iter().chain(q).copied().collect();
        let adj = self.adjacency();
        let mut degree: Vec<usize> = adj.iter().map(Vec::len).collect();
        let mut used = vec![false; self.cells.len()];
        let mut plan = DMatrix::zeros(self.k, self.n);
        let mut stack: Vec<usize> = (0..degree.len()).filter(|&v| degree[v] == 1).collect();
        while let Some(leaf) = stack.pop() {
            if degree[leaf] != 1 {
                continue;
            }
            let Some(&(other, idx)) = adj[leaf].iter().find(|(_, idx)| !used[*idx]) else {
                continue;
            };
            used[idx] = true;
            let (i, j) = self.cells[idx];
            let v = remaining[leaf].max(0.0);
            plan[(i, j)] = v;
            remaining[leaf] = 0.0;
            remaining[other] -= v;
            degree[leaf] -= 1;
            degree[other] -= 1;
            if degree[other] == 1 {
                stack.push(other);
            }
        }
        plan
    }
}

/// North-west corner start; ties advance the row so the basis keeps
/// `k + n - 1` cells.
fn initial_basis(p: &[f64], q: &[f64]) -> (Basis, Vec<f64>) {
    let (k, n) = (p.len(), q.len());
    let (mut s, mut d) = (p.to_vec(), q.to_vec());
    let (mut i, mut j) = (0, 0);
    let mut cells = Vec::with_capacity(k + n - 1);
    let mut values = Vec::with_capacity(k + n - 1);
    loop {
        let x = s[i].min(d[j]);
        cells.push((i, j));
        values.push(x);
        s[i] -= x;
        d[j] -= x;
        if i == k - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < k - 1 && s[i] <= d[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    (Basis { k, n, cells }, values)
}

/// Minimum of `tr(H^T C)` subject to `H 1 = p`, `H^T 1 = q`, `H >= 0`.
pub fn ot_solve(c: &DMatrix<f64>, p: &[f64], q: &[f64]) -> Result<TransportPlan> {
    check(c, p, q)?;
    let (mut basis, mut values) = initial_basis(p, q);
    let scale = c.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1.0);
    let tol = 1e-12 * scale;
    let (k, n) = c.shape();
    // Bland's rule on both entering and leaving choices rules out cycling
    // on degenerate pivots.
    let cap = 50 * (k + n) * k * n;
    for _ in 0..cap {
        let (u, v) = basis.potentials(c);
        let mut entering = None;
        'scan: for i in 0..k {
            for j in 0..n {
                if c[(i, j)] - u[i] - v[j] < -tol && !basis.cells.contains(&(i, j)) {
                    entering = Some((i, j));
                    break 'scan;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let plan = basis.solve_values(p, q);
            let cost = plan.component_mul(c).sum();
            return Ok(TransportPlan {
                plan,
                source: p.to_vec(),
                target: q.to_vec(),
                cost_matrix: c.clone(),
                cost,
            });
        };
        let path = basis.path(ei, ej);
        // Cells at even positions of the path lose mass.
        let mut leave = path[0];
        for &idx in path.iter().step_by(2) {
            let better = values[idx] < values[leave]
                || (values[idx] == values[leave] && basis.cells[idx] < basis.cells[leave]);
            if better {
                leave = idx;
            }
        }
        let theta = values[leave];
        for (pos, &idx) in path.iter().enumerate() {
            if pos % 2 == 0 {
                values[idx] -= theta;
            } else {
                values[idx] += theta;
            }
        }
        basis.cells[leave] = (ei, ej);
        values[leave] = theta;
    }
    Err(invalid("transport", "simplex iteration limit reached"))
}

/// Per-sample gradient of `tr(H^T C)` under squared Euclidean cost with the
/// plan frozen, and the barycentric target of each source sample.
#[derive(Clone, Debug, PartialEq)]
pub struct GradientTargets {
    /// `2 p_k (x_k - target_k)` per source sample.
    pub gradients: Vec<DVector<f64>>,
    /// `sum_n (H[k, n] / p_k) y_n`.
    pub targets: Vec<DVector<f64>>,
}

pub fn ot_gradient_targets(
    plan: &TransportPlan,
    samples: &[DVector<f64>],
    targets: &[DVector<f64>],
) -> Result<GradientTargets> {
    let (k, n) = plan.plan.shape();
    if samples.len() != k || targets.len() != n {
        return Err(invalid("transport gradient", "sample counts do not match the plan"));
    }
    let d = samples[0].len();
    if samples.iter().chain(targets).any(|v| v.len() != d) {
        return Err(invalid("transport gradient", "samples differ in dimension"));
    }
    let mut grads = Vec::with_capacity(k);
    let mut bary = Vec::with_capacity(k);
    for (i, x) in samples.iter().enumerate() {
        let pk = plan.source[i];
        if pk <= 0.0 {
            return Err(invalid("transport gradient", format!("source {i} has no mass")));
        }
        let mut t = DVector::zeros(d);
        for (j, y) in targets.iter().enumerate() {
            t += y * (plan.plan[(i, j)] / pk);
        }
        grads.push((x - &t) * (2.0 * pk));
        bary.push(t);
    }
    Ok(GradientTargets {
        gradients: grads,
        targets: bary,
    })
}

/// Squared Euclidean cost between two point sets.
pub fn squared_cost(a: &[DVector<f64>], b: &[DVector<f64>]) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), b.len(), |i, j| (&a[i] - &b[j]).norm_squared())
}
