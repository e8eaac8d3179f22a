//! Exact unregularized optimal transport for tiny grids, solved as a
//! transportation linear program with the transportation simplex method.
//!
//! Used as ground truth for the regularized solver. Pivots pick the most
//! negative reduced cost, except that after a degenerate pivot Bland's rule
//! (lowest index entering and leaving) takes over until progress resumes,
//! which rules out cycling.

use std::collections::VecDeque;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::otcore::CostMatrix;

/// Largest number of pixels the exact solver accepts.
pub const ORACLE_LIMIT: usize = 256;

const REDUCED_COST_TOL: f64 = 1e-12;

/// An optimal transport plan and its cost.
#[derive(Debug, Clone, Serialize)]
pub struct ExactPlan {
    pub value: f64,
    pub iterations: usize,
    #[serde(skip)]
    pub size: usize,
    /// Row-major `N×N` plan.
    #[serde(skip)]
    pub plan: Vec<f64>,
    /// Dual potentials with `row[i] + col[j] = c_ij` on the basis.
    #[serde(skip)]
    pub row_potential: Vec<f64>,
    #[serde(skip)]
    pub col_potential: Vec<f64>,
}

impl ExactPlan {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.plan[i * self.size + j]
    }
}

struct Basis {
    m: usize,
    n: usize,
    cells: Vec<(usize, usize)>,
    flow: Vec<f64>,
    is_basic: Vec<bool>,
}

impl Basis {
    /// North-west corner rule; always yields `m + n − 1` cells forming a
    /// spanning tree, possibly with zero (degenerate) flows.
    fn northwest(p: &[f64], q: &[f64]) -> Self {
        let (m, n) = (p.len(), q.len());
        let mut supply = p.to_vec();
        let mut demand = q.to_vec();
        let mut basis = Basis {
            m,
            n,
            cells: Vec::with_capacity(m + n - 1),
            flow: Vec::with_capacity(m + n - 1),
            is_basic: vec![false; m * n],
        };
        let (mut i, mut j) = (0, 0);
        for _ in 0..m + n - 1 {
            let x = supply[i].min(demand[j]).max(0.0);
            supply[i] -= x;
            demand[j] -= x;
            basis.cells.push((i, j));
            basis.flow.push(x);
            basis.is_basic[i * n + j] = true;
            if j == n - 1 || (i < m - 1 && supply[i] <= demand[j]) {
                i += 1;
            } else {
                j += 1;
            }
        }
        basis
    }

    /// Tree adjacency: node `i < m` is row `i`, node `m + j` is column `j`.
    fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.m + self.n];
        for (k, &(i, j)) in self.cells.iter().enumerate() {
            adj[i].push((self.m + j, k));
            adj[self.m + j].push((i, k));
        }
        adj
    }

    fn potentials(&self, cost: &CostMatrix, adj: &[Vec<(usize, usize)>]) -> (Vec<f64>, Vec<f64>) {
        let m = self.m;
        let mut pot = vec![f64::NAN; m + self.n];
        pot[0] = 0.0;
        let mut queue = VecDeque::from([0]);
        while let Some(node) = queue.pop_front() {
            for &(next, k) in &adj[node] {
                if pot[next].is_nan() {
                    let (i, j) = self.cells[k];
                    pot[next] = cost.get(i, j) - pot[node];
                    queue.push_back(next);
                }
            }
        }
        let col = pot.split_off(m);
        (pot, col)
    }

    /// Basis cells on the tree path from row `i` to column `j`, in order.
    fn path(&self, adj: &[Vec<(usize, usize)>], i: usize, j: usize) -> Vec<usize> {
        let target = self.m + j;
        let mut via = vec![usize::MAX; self.m + self.n];
        let mut prev = vec![usize::MAX; self.m + self.n];
        let mut queue = VecDeque::from([i]);
        prev[i] = i;
        while let Some(node) = queue.pop_front() {
            if node == target {
                break;
            }
            for &(next, k) in &adj[node] {
                if prev[next] == usize::MAX {
                    prev[next] = node;
                    via[next] = k;
                    queue.push_back(next);
                }
            }
        }
        let mut edges = Vec::new();
        let mut node = target;
        while node != i {
            edges.push(via[node]);
            node = prev[node];
        }
        edges.reverse();
        edges
    }
}

/// Minimum of `Σ c_ij γ_ij` over couplings with marginals `p` and `q`.
///
/// Optimality is confirmed before returning: all reduced costs are
/// nonnegative and the primal and dual objectives agree.
pub fn exact_wasserstein(p: &[f64], q: &[f64], cost: &CostMatrix) -> Result<ExactPlan> {
    let n = cost.size();
    if n > ORACLE_LIMIT {
        return Err(Error::Scale {
            what: "the exact solver",
            pixels: n,
            limit: ORACLE_LIMIT,
            hint: "use the regularized solver",
        });
    }
    if p.len() != n || q.len() != n {
        return Err(Error::Geometry(format!(
            "marginals of length {} and {} for a {n}-pixel cost",
            p.len(),
            q.len()
        )));
    }
    if p.iter().chain(q).any(|v| !(v.is_finite() && *v >= 0.0)) {
        return Err(Error::DegenerateInput("marginals must be finite and nonnegative".into()));
    }
    let source_total: f64 = p.iter().sum();
    let target_total: f64 = q.iter().sum();
    if (source_total - target_total).abs() > 1e-9 {
        return Err(Error::Balance {
            source_total,
            target_total,
        });
    }

    let mut basis = Basis::northwest(p, q);
    let mut iterations = 0;
    let mut bland = false;
    let (row_potential, col_potential) = loop {
        let adj = basis.adjacency();
        let (alpha, beta) = basis.potentials(cost, &adj);

        let mut entering = None;
        let mut best = -REDUCED_COST_TOL;
        'scan: for i in 0..n {
            for j in 0..n {
                if basis.is_basic[i * n + j] {
                    continue;
                }
                let rc = cost.get(i, j) - alpha[i] - beta[j];
                if rc < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = rc;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            break (alpha, beta);
        };
        iterations += 1;

        // Cycle: entering cell (+), then path cells alternating −, +, …
        let path = basis.path(&adj, ei, ej);
        let minus = path.iter().step_by(2);
        let theta = minus
            .clone()
            .map(|&k| basis.flow[k])
            .fold(f64::INFINITY, f64::min);
        let leaving = *minus
            .filter(|&&k| basis.flow[k] <= theta)
            .min_by_key(|&&k| {
                let (i, j) = basis.cells[k];
                i * n + j
            })
            .expect("cycle has a decreasing cell");

        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                basis.flow[k] = (basis.flow[k] - theta).max(0.0);
            } else {
                basis.flow[k] += theta;
            }
        }
        let (li, lj) = basis.cells[leaving];
        basis.is_basic[li * n + lj] = false;
        basis.is_basic[ei * n + ej] = true;
        basis.cells[leaving] = (ei, ej);
        basis.flow[leaving] = theta;
        bland = theta == 0.0;
    };

    let mut plan = vec![0.0; n * n];
    for (&(i, j), &x) in basis.cells.iter().zip(&basis.flow) {
        plan[i * n + j] = x;
    }
    let value: f64 = plan.iter().zip(cost.entries()).map(|(g, c)| g * c).sum();
    let dual: f64 = p.iter().zip(&row_potential).map(|(a, b)| a * b).sum::<f64>()
        + q.iter().zip(&col_potential).map(|(a, b)| a * b).sum::<f64>();
    if (value - dual).abs() > 1e-9 {
        return Err(Error::Numeric("exact transport duality gap"));
    }
    Ok(ExactPlan {
        value,
        iterations,
        size: n,
        plan,
        row_potential,
        col_potential,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otcore::build_cost;
    use crate::raster::GridGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn identical_marginals_cost_nothing() {
        let g = GridGeometry::new(3, 3, 1.0).unwrap();
        let cost = build_cost(&g).unwrap();
        let p: Vec<f64> = (1..=9).map(|k| k as f64 / 45.0).collect();
        let plan = exact_wasserstein(&p, &p, &cost).unwrap();
        assert!(plan.value.abs() < 1e-15);
        for i in 0..9 {
            assert!((plan.get(i, i) - p[i]).abs() < 1e-12);
        }
    }

    #[test]
    fn pure_swap() {
        let g = GridGeometry::new(2, 1, 1.0).unwrap();
        let cost = build_cost(&g).unwrap();
        let plan = exact_wasserstein(&[1.0, 0.0], &[0.0, 1.0], &cost).unwrap();
        assert_eq!(plan.value, 0.25);
        assert_eq!(plan.get(0, 1), 1.0);
    }

    #[test]
    fn marginals_and_value_consistent() {
        let g = GridGeometry::new(4, 4, 1.0).unwrap();
        let cost = build_cost(&g).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut p: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
            let mut q: Vec<f64> = (0..16).map(|_| rng.gen::<f64>()).collect();
            let (sp, sq): (f64, f64) = (p.iter().sum(), q.iter().sum());
            p.iter_mut().for_each(|v| *v /= sp);
            q.iter_mut().for_each(|v| *v /= sq);
            let plan = exact_wasserstein(&p, &q, &cost).unwrap();
            for i in 0..16 {
                let row: f64 = (0..16).map(|j| plan.get(i, j)).sum();
                let col: f64 = (0..16).map(|j| plan.get(j, i)).sum();
                assert!((row - p[i]).abs() < 1e-9);
                assert!((col - q[i]).abs() < 1e-9);
            }
            assert!(plan.plan.iter().all(|&v| v >= 0.0));
            // complementary slackness
            for i in 0..16 {
                for j in 0..16 {
                    let rc = cost.get(i, j) - plan.row_potential[i] - plan.col_potential[j];
                    assert!(rc >= -1e-12);
                    if plan.get(i, j) > 1e-12 {
                        assert!(rc.abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn degenerate_integer_marginals_terminate() {
        // Many ties: uniform marginals on a grid with repeated costs.
        let g = GridGeometry::new(4, 4, 1.0).unwrap();
        let cost = build_cost(&g).unwrap();
        let mut p = vec![0.0; 16];
        let mut q = vec![0.0; 16];
        for k in 0..4 {
            p[k] = 0.25;
            q[15 - k] = 0.25;
        }
        let plan = exact_wasserstein(&p, &q, &cost).unwrap();
        // Row 0 moves to row 3: three pixel pitches of 1/4 each.
        assert!((plan.value - 0.5625).abs() < 1e-12);
    }

    #[test]
    fn rejects_unbalanced_and_large() {
        let g = GridGeometry::new(2, 1, 1.0).unwrap();
        let cost = build_cost(&g).unwrap();
        assert!(matches!(
            exact_wasserstein(&[0.5, 0.5], &[0.5, 0.6], &cost),
            Err(Error::Balance { .. })
        ));
        let big = build_cost(&GridGeometry::new(17, 16, 1.0).unwrap()).unwrap();
        let p = vec![1.0 / 272.0; 272];
        assert!(matches!(exact_wasserstein(&p, &p, &big), Err(Error::Scale { .. })));
    }
}
