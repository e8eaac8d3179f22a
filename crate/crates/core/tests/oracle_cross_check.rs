//! The transportation simplex against an independent brute-force solver that
//! enumerates every vertex of the transportation polytope.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seaice_ot::prelude::*;

/// Solves the square system `a x = b` by Gaussian elimination with partial
/// pivoting; `None` when singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    Some(x)
}

fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut with_last = subsets(n - 1, k - 1);
    with_last.iter_mut().for_each(|s| s.push(n - 1));
    let mut out = subsets(n - 1, k);
    out.extend(with_last);
    out
}

/// Minimum of `⟨γ, C⟩` over all basic feasible plans. A basis has `2N − 1`
/// cells; the last column constraint is implied by the others.
fn brute_force(p: &[f64], q: &[f64], cost: &CostMatrix) -> f64 {
    let n = p.len();
    let m = 2 * n - 1;
    let mut best = f64::INFINITY;
    for cells in subsets(n * n, m) {
        let mut a = vec![vec![0.0; m]; m];
        let mut b = vec![0.0; m];
        for (k, &cell) in cells.iter().enumerate() {
            let (i, j) = (cell / n, cell % n);
            a[i][k] = 1.0;
            if j < n - 1 {
                a[n + j][k] = 1.0;
            }
        }
        b[..n].copy_from_slice(p);
        b[n..].copy_from_slice(&q[..n - 1]);
        let Some(x) = solve(a, b) else { continue };
        if x.iter().all(|&v| v >= -1e-12) {
            let value: f64 = cells.iter().zip(&x).map(|(&c, v)| cost.entries()[c] * v).sum();
            best = best.min(value);
        }
    }
    best
}

fn random_simplex(n: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let v: Vec<f64> = (0..n).map(|_| rng.gen::<f64>() + 0.01).collect();
    let s: f64 = v.iter().sum();
    v.iter().map(|x| x / s).collect()
}

#[test]
fn simplex_matches_vertex_enumeration_on_two_by_two() {
    let g = GridGeometry::new(2, 2, 1.0).unwrap();
    let cost = build_cost(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let p = random_simplex(4, &mut rng);
        let q = random_simplex(4, &mut rng);
        let exact = exact_wasserstein(&p, &q, &cost).unwrap();
        let brute = brute_force(&p, &q, &cost);
        assert!((exact.value - brute).abs() < 1e-12, "{} vs {brute}", exact.value);
    }
}

#[test]
fn two_pixel_closed_form() {
    // Moving mass |p0 − q0| across one pixel pitch of a 2-pixel axis costs
    // (1/2)² per unit.
    let g = GridGeometry::new(2, 1, 1.0).unwrap();
    let cost = build_cost(&g).unwrap();
    for (p0, q0) in [(0.3, 0.7), (0.9, 0.1), (0.5, 0.5)] {
        let exact = exact_wasserstein(&[p0, 1.0 - p0], &[q0, 1.0 - q0], &cost).unwrap();
        assert!((exact.value - 0.25 * (p0 - q0).abs()).abs() < 1e-15);
    }
}

#[test]
fn regularized_value_approaches_exact_from_below() {
    let g = GridGeometry::new(3, 2, 1.0).unwrap();
    let cost = build_cost(&g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let p = random_simplex(6, &mut rng);
    let q = random_simplex(6, &mut rng);
    let exact = exact_wasserstein(&p, &q, &cost).unwrap().value;
    let pm = MassField::from_mass(g, p, 1e-12).unwrap();
    let qm = MassField::from_mass(g, q, 1e-12).unwrap();
    let opts = SinkhornOptions {
        tol: 1e-10,
        max_iter: 100_000,
        ..SinkhornOptions::default()
    }
    .log_domain();
    let mut last_gap = f64::INFINITY;
    for eps in [1e-1, 3e-2, 1e-2, 3e-3] {
        let kernel = GibbsKernel::new(KernelSpec::dense(eps), g).unwrap();
        let pair = sinkhorn(&pm, &qm, &kernel, &opts).unwrap();
        let w = wasserstein_value(&pm, &qm, &pair).unwrap();
        let gap = exact - w;
        assert!(gap >= -1e-9, "eps {eps}: W_eps {w} above exact {exact}");
        assert!(gap < last_gap);
        last_gap = gap;
    }
}
