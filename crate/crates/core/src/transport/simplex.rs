//! Exact transportation simplex.
//!
//! Starts from the northwest-corner staircase (always a spanning tree of
//! `I + J - 1` basic cells, so degenerate starts need no special casing),
//! prices with row/column potentials and pivots around the unique cycle the
//! entering cell closes. Entering cells follow Dantzig's rule until a pivot
//! is degenerate; from then on Bland's lowest-index rule is used until mass
//! moves again, which rules out cycling.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::scalar::Real;

/// Tolerance on the marginals of a weight vector.
pub const SIMPLEX_TOL: f64 = 1e-10;

/// Optimal coupling with its certificate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct TransportPlan<T> {
    pub matrix: Mat<T>,
    pub value: T,
    pub dual_row: Vec<T>,
    pub dual_col: Vec<T>,
    /// Basic cells of the final basis, row-major sorted.
    pub basis: Vec<(usize, usize)>,
}

pub(crate) fn check_simplex<T: Real>(w: &[T], what: &str) -> Result<()> {
    if w.is_empty() {
        return Err(Error::NotSimplex(format!("{what}: empty weight vector")));
    }
    let mut sum = T::zero();
    for (i, &v) in w.iter().enumerate() {
        if !v.is_finite() || v < T::zero() {
            return Err(Error::NotSimplex(format!("{what}: weight {i} = {v}")));
        }
        sum += v;
    }
    if (sum - T::one()).abs() > T::tol(SIMPLEX_TOL) {
        return Err(Error::NotSimplex(format!("{what}: weights sum to {sum}")));
    }
    Ok(())
}

struct Basis {
    rows: usize,
    cols: usize,
    basic: Vec<bool>,
}

impl Basis {
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.cols + j
    }

    fn adjacency(&self) -> (Vec<Vec<usize>>, Vec<Vec<usize>>) {
        let mut by_row = vec![Vec::new(); self.rows];
        let mut by_col = vec![Vec::new(); self.cols];
        for i in 0..self.rows {
            for j in 0..self.cols {
                if self.basic[self.idx(i, j)] {
                    by_row[i].push(j);
                    by_col[j].push(i);
                }
            }
        }
        (by_row, by_col)
    }
}

/// Node of the basis tree: rows are `0..I`, columns `I..I+J`.
fn potentials<T: Real>(cost: &Mat<T>, basis: &Basis) -> Result<(Vec<T>, Vec<T>)> {
    let (by_row, by_col) = basis.adjacency();
    let (m, n) = (basis.rows, basis.cols);
    let mut u = vec![T::nan(); m];
    let mut v = vec![T::nan(); n];
    let mut seen = vec![false; m + n];
    let mut stack = vec![0usize];
    u[0] = T::zero();
    seen[0] = true;
    while let Some(node) = stack.pop() {
        if node < m {
            for &j in &by_row[node] {
                if !seen[m + j] {
                    seen[m + j] = true;
                    v[j] = cost[(node, j)] - u[node];
                    stack.push(m + j);
                }
            }
        } else {
            let j = node - m;
            for &i in &by_col[j] {
                if !seen[i] {
                    seen[i] = true;
                    u[i] = cost[(i, j)] - v[j];
                    stack.push(i);
                }
            }
        }
    }
    if seen.iter().any(|s| !s) {
        return Err(Error::Numeric("transport basis is not a spanning tree".into()));
    }
    Ok((u, v))
}

/// Basic cells on the tree path from row `r` to column `c`, in order.
fn tree_path(basis: &Basis, r: usize, c: usize) -> Result<Vec<(usize, usize)>> {
    let (by_row, by_col) = basis.adjacency();
    let m = basis.rows;
    let total = m + basis.cols;
    let mut parent: Vec<Option<usize>> = vec![None; total];
    let mut seen = vec![false; total];
    let mut queue = std::collections::VecDeque::from([r]);
    seen[r] = true;
    let target = m + c;
    while let Some(node) = queue.pop_front() {
        if node == target {
            break;
        }
        let nbrs: Box<dyn Iterator<Item = usize>> = if node < m {
            Box::new(by_row[node].iter().map(|&j| m + j))
        } else {
            Box::new(by_col[node - m].iter().copied())
        };
        for next in nbrs {
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some(node);
                queue.push_back(next);
            }
        }
    }
    if !seen[target] {
        return Err(Error::Numeric("entering cell does not close a cycle".into()));
    }
    let mut cells = Vec::new();
    let mut node = target;
    while let Some(p) = parent[node] {
        let cell = if p < m { (p, node - m) } else { (node, p - m) };
        cells.push(cell);
        node = p;
    }
    cells.reverse();
    Ok(cells)
}

/// Minimizes `Σ V_ij cost_ij` over couplings of `w1` (rows) and `w2` (columns).
pub fn solve_transport<T: Real>(cost: &Mat<T>, w1: &[T], w2: &[T]) -> Result<TransportPlan<T>> {
    let (m, n) = (w1.len(), w2.len());
    check_simplex(w1, "row weights")?;
    check_simplex(w2, "column weights")?;
    if cost.rows != m || cost.cols != n {
        return Err(Error::DimensionMismatch { expected: m * n, got: cost.rows * cost.cols });
    }
    if let Some(bad) = cost.data.iter().find(|c| !c.is_finite()) {
        return Err(Error::InvalidParameter(format!("non-finite transport cost {bad}")));
    }

    let scale = cost.data.iter().fold(T::one(), |a, &c| a.max(c.abs()));
    let enter_tol = T::tol(1e-12) * scale;

    // northwest corner staircase
    let mut x = Mat::zeros(m, n);
    let mut basis = Basis { rows: m, cols: n, basic: vec![false; m * n] };
    let mut supply = w1.to_vec();
    let mut demand = w2.to_vec();
    let (mut i, mut j) = (0, 0);
    loop {
        let q = supply[i].min(demand[j]).max(T::zero());
        x[(i, j)] = q;
        let id = basis.idx(i, j);
        basis.basic[id] = true;
        supply[i] -= q;
        demand[j] -= q;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if i == m - 1 {
            j += 1;
        } else if j == n - 1 || supply[i] <= demand[j] {
            i += 1;
        } else {
            j += 1;
        }
    }
    // the last cell absorbs the rounding gap between the two totals
    x[(m - 1, n - 1)] = (x[(m - 1, n - 1)] + supply[m - 1].max(demand[n - 1])).max(T::zero());

    let max_iter = 1_000_000usize;
    let mut bland = false;
    for _ in 0..max_iter {
        let (u, v) = potentials(cost, &basis)?;
        let mut entering = None;
        let mut most_negative = -enter_tol;
        'scan: for r in 0..m {
            for c in 0..n {
                if basis.basic[basis.idx(r, c)] {
                    continue;
                }
                let reduced = cost[(r, c)] - u[r] - v[c];
                if reduced < most_negative {
                    entering = Some((r, c));
                    if bland {
                        break 'scan;
                    }
                    most_negative = reduced;
                }
            }
        }
        let Some((er, ec)) = entering else {
            return finish(cost, x, basis, u, v, scale);
        };

        let path = tree_path(&basis, er, ec)?;
        // path alternates starting with a cell in row `er`; those lose mass
        let mut theta = T::infinity();
        let mut leaving = None;
        for (k, &(r, c)) in path.iter().enumerate() {
            if k % 2 == 0 {
                let val = x[(r, c)];
                let better = match leaving {
                    None => true,
                    Some(cur) => val < theta || (val == theta && (r, c) < cur),
                };
                if better {
                    theta = val;
                    leaving = Some((r, c));
                }
            }
        }
        let (lr, lc) = leaving.expect("cycle has a decreasing cell");
        for (k, &(r, c)) in path.iter().enumerate() {
            if k % 2 == 0 {
                x[(r, c)] = (x[(r, c)] - theta).max(T::zero());
            } else {
                x[(r, c)] += theta;
            }
        }
        x[(er, ec)] = theta;
        x[(lr, lc)] = T::zero();
        let (li, ei) = (basis.idx(lr, lc), basis.idx(er, ec));
        basis.basic[li] = false;
        basis.basic[ei] = true;
        bland = theta == T::zero();
    }
    Err(Error::Numeric(format!("transportation simplex exceeded {max_iter} pivots")))
}

fn finish<T: Real>(
    cost: &Mat<T>,
    matrix: Mat<T>,
    basis: Basis,
    dual_row: Vec<T>,
    dual_col: Vec<T>,
    scale: T,
) -> Result<TransportPlan<T>> {
    let feas_tol = T::tol(1e-9) * scale;
    for r in 0..basis.rows {
        for c in 0..basis.cols {
            if dual_row[r] + dual_col[c] > cost[(r, c)] + feas_tol {
                return Err(Error::Numeric(format!("dual infeasible at ({r}, {c}) after termination")));
            }
        }
    }
    let value = matrix.data.iter().zip(&cost.data).map(|(&a, &b)| a * b).sum();
    let basis_cells = (0..basis.rows)
        .flat_map(|r| (0..basis.cols).map(move |c| (r, c)))
        .filter(|&(r, c)| basis.basic[basis.idx(r, c)])
        .collect();
    Ok(TransportPlan { matrix, value, dual_row, dual_col, basis: basis_cells })
}

impl<T: Real> TransportPlan<T> {
    /// Checks feasibility, value consistency, complementary slackness and
    /// dual feasibility against the given problem.
    pub fn certify(&self, cost: &Mat<T>, w1: &[T], w2: &[T]) -> Result<()> {
        let (m, n) = (w1.len(), w2.len());
        if self.matrix.rows != m || self.matrix.cols != n || cost.rows != m || cost.cols != n {
            return Err(Error::DimensionMismatch { expected: m * n, got: self.matrix.rows * self.matrix.cols });
        }
        let scale = cost.data.iter().fold(T::one(), |a, &c| a.max(c.abs()));
        let marg = T::tol(SIMPLEX_TOL);
        for (r, &w) in w1.iter().enumerate() {
            let s: T = (0..n).map(|c| self.matrix[(r, c)]).sum();
            if (s - w).abs() > marg {
                return Err(Error::NotOptimal(format!("row {r} sums to {s}, expected {w}")));
            }
        }
        for (c, &w) in w2.iter().enumerate() {
            let s: T = (0..m).map(|r| self.matrix[(r, c)]).sum();
            if (s - w).abs() > marg {
                return Err(Error::NotOptimal(format!("column {c} sums to {s}, expected {w}")));
            }
        }
        if self.matrix.data.iter().any(|&v| v < T::zero()) {
            return Err(Error::NotOptimal("negative transport mass".into()));
        }
        let value: T = self.matrix.data.iter().zip(&cost.data).map(|(&a, &b)| a * b).sum();
        if (value - self.value).abs() > marg * scale {
            return Err(Error::NotOptimal(format!("stored value {} differs from {value}", self.value)));
        }
        let cs_tol = T::tol(1e-8) * scale;
        let feas_tol = T::tol(1e-9) * scale;
        for r in 0..m {
            for c in 0..n {
                let slack = cost[(r, c)] - self.dual_row[r] - self.dual_col[c];
                if slack < -feas_tol {
                    return Err(Error::NotOptimal(format!("dual infeasible at ({r}, {c}): slack {slack}")));
                }
                if self.matrix[(r, c)] > T::tol(1e-12) && slack.abs() > cs_tol {
                    return Err(Error::NotOptimal(format!(
                        "complementary slackness fails at ({r}, {c}): slack {slack}"
                    )));
                }
            }
        }
        Ok(())
    }
}
