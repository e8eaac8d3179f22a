use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::cost::build_cost;
use super::{KernelMode, KernelSpec};
use crate::error::{Error, Result};
use crate::raster::GridGeometry;

/// The Gibbs kernel `ξ_ij = exp(-c_ij / epsilon)` of a grid, ready to act on
/// per-pixel vectors.
///
/// Every operation comes in a linear form and a log-domain form
/// (`log(ξ · exp(h))`, evaluated with log-sum-exp). The cost-weighted forms
/// act with `ξ_ij · c_ij` instead of `ξ_ij`.
pub struct GibbsKernel {
    spec: KernelSpec,
    geometry: GridGeometry,
    repr: Repr,
}

enum Repr {
    Dense {
        cost: Vec<f64>,
        gibbs: Vec<f64>,
    },
    Separable {
        x: Taps,
        y: Taps,
    },
}

/// One-sided 1-D taps indexed by offset `0..=radius`.
struct Taps {
    gibbs: Vec<f64>,
    log_gibbs: Vec<f64>,
    /// `gibbs[d] · (d·h)²`
    moment: Vec<f64>,
    log_moment: Vec<f64>,
}

impl Taps {
    fn new(radius: usize, pitch: f64, epsilon: f64) -> Self {
        let sq: Vec<f64> = (0..=radius).map(|d| (d as f64 * pitch).powi(2)).collect();
        let log_gibbs: Vec<f64> = sq.iter().map(|s| -s / epsilon).collect();
        let gibbs: Vec<f64> = log_gibbs.iter().map(|l| l.exp()).collect();
        let moment = gibbs.iter().zip(&sq).map(|(g, s)| g * s).collect();
        let log_moment = log_gibbs.iter().zip(&sq).map(|(l, s)| l + s.ln()).collect();
        Self {
            gibbs,
            log_gibbs,
            moment,
            log_moment,
        }
    }
}

impl fmt::Debug for GibbsKernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GibbsKernel")
            .field("spec", &self.spec)
            .field("geometry", &self.geometry)
            .finish_non_exhaustive()
    }
}

impl GibbsKernel {
    pub fn new(spec: KernelSpec, geometry: GridGeometry) -> Result<Arc<Self>> {
        spec.validate(&geometry)?;
        let repr = match spec.mode {
            KernelMode::Dense => {
                let cost = build_cost(&geometry)?.entries().to_vec();
                let gibbs = cost.iter().map(|c| (-c / spec.epsilon).exp()).collect();
                Repr::Dense { cost, gibbs }
            }
            KernelMode::Convolutional { truncation_radius } => {
                let h = geometry.pitch();
                let rx = truncation_radius.min(geometry.width() - 1);
                let ry = truncation_radius.min(geometry.height() - 1);
                Repr::Separable {
                    x: Taps::new(rx, h, spec.epsilon),
                    y: Taps::new(ry, h, spec.epsilon),
                }
            }
        };
        Ok(Arc::new(Self {
            spec,
            geometry,
            repr,
        }))
    }

    pub fn spec(&self) -> &KernelSpec {
        &self.spec
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn epsilon(&self) -> f64 {
        self.spec.epsilon
    }

    /// `ξ v`. The kernel is symmetric, so this is also `ξᵀ v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        debug_assert_eq!(v.len(), self.geometry.len());
        match &self.repr {
            Repr::Dense { gibbs, .. } => dense_matvec(gibbs, v),
            Repr::Separable { x, y } => self.separable(v, &x.gibbs, &y.gibbs),
        }
    }

    /// `log(ξ · exp(h))`; entries of `h` may be `-inf`.
    pub fn apply_log(&self, h: &[f64]) -> Vec<f64> {
        debug_assert_eq!(h.len(), self.geometry.len());
        match &self.repr {
            Repr::Dense { cost, .. } => {
                let eps = self.spec.epsilon;
                dense_logsumexp(cost, h, |c| -c / eps)
            }
            Repr::Separable { x, y } => self.separable_log(h, &x.log_gibbs, &y.log_gibbs),
        }
    }

    /// `Σ_j ξ_ij c_ij v_j`.
    pub fn apply_cost_weighted(&self, v: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Dense { cost, gibbs } => {
                let n = v.len();
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let c = &cost[i * n..(i + 1) * n];
                        let k = &gibbs[i * n..(i + 1) * n];
                        c.iter().zip(k).zip(v).map(|((c, k), v)| c * k * v).sum()
                    })
                    .collect()
            }
            Repr::Separable { x, y } => {
                // c = dx² + dy² splits the weighted kernel into two separable terms.
                let mut a = self.separable(v, &x.moment, &y.gibbs);
                let b = self.separable(v, &x.gibbs, &y.moment);
                a.iter_mut().zip(&b).for_each(|(a, b)| *a += b);
                a
            }
        }
    }

    /// `log Σ_j ξ_ij c_ij exp(h_j)`.
    pub fn apply_cost_weighted_log(&self, h: &[f64]) -> Vec<f64> {
        match &self.repr {
            Repr::Dense { cost, .. } => {
                let eps = self.spec.epsilon;
                dense_logsumexp(cost, h, |c| -c / eps + c.ln())
            }
            Repr::Separable { x, y } => {
                let a = self.separable_log(h, &x.log_moment, &y.log_gibbs);
                let b = self.separable_log(h, &x.log_gibbs, &y.log_moment);
                a.iter().zip(&b).map(|(&a, &b)| log_add(a, b)).collect()
            }
        }
    }

    fn separable(&self, v: &[f64], wx: &[f64], wy: &[f64]) -> Vec<f64> {
        let (w, h) = (self.geometry.width(), self.geometry.height());
        let mut tmp = vec![0.0; v.len()];
        tmp.par_chunks_mut(w)
            .zip(v.par_chunks(w))
            .for_each(|(out, row)| convolve_row(row, out, wx));
        let mut out = vec![0.0; v.len()];
        out.par_chunks_mut(w).enumerate().for_each(|(r, dst)| {
            let src = |k: usize| &tmp[k * w..(k + 1) * w];
            axpy(dst, wy[0], src(r));
            for (d, &c) in wy.iter().enumerate().skip(1) {
                if r >= d {
                    axpy(dst, c, src(r - d));
                }
                if r + d < h {
                    axpy(dst, c, src(r + d));
                }
            }
        });
        out
    }

    fn separable_log(&self, v: &[f64], lx: &[f64], ly: &[f64]) -> Vec<f64> {
        let (w, h) = (self.geometry.width(), self.geometry.height());
        let mut tmp = vec![0.0; v.len()];
        tmp.par_chunks_mut(w).zip(v.par_chunks(w)).for_each(|(out, row)| {
            for (x, o) in out.iter_mut().enumerate() {
                *o = lse_taps(lx, x, w, |k| row[k]);
            }
        });
        let mut out = vec![0.0; v.len()];
        out.par_chunks_mut(w).enumerate().for_each(|(r, dst)| {
            for (x, o) in dst.iter_mut().enumerate() {
                *o = lse_taps(ly, r, h, |k| tmp[k * w + x]);
            }
        });
        out
    }
}

/// Checked `ξ v`: rejects non-finite input.
pub fn kernel_apply(v: &[f64], kernel: &GibbsKernel) -> Result<Vec<f64>> {
    if v.len() != kernel.geometry().len() {
        return Err(Error::Geometry(format!(
            "vector of length {} on a grid of {} pixels",
            v.len(),
            kernel.geometry().len()
        )));
    }
    if v.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("kernel input"));
    }
    Ok(kernel.apply(v))
}

#[inline]
fn axpy(dst: &mut [f64], a: f64, x: &[f64]) {
    dst.iter_mut().zip(x).for_each(|(d, x)| *d += a * x);
}

/// `out[x] = Σ_d w[|d|] · row[x + d]` over in-range offsets.
fn convolve_row(row: &[f64], out: &mut [f64], w: &[f64]) {
    let n = row.len();
    out.iter_mut().zip(row).for_each(|(o, r)| *o = w[0] * r);
    for (d, &c) in w.iter().enumerate().skip(1).take(n.saturating_sub(1)) {
        axpy(&mut out[d..], c, &row[..n - d]);
        axpy(&mut out[..n - d], c, &row[d..]);
    }
}

/// `log Σ_d exp(lw[|d|] + val(pos + d))` over in-range offsets.
fn lse_taps(lw: &[f64], pos: usize, len: usize, val: impl Fn(usize) -> f64) -> f64 {
    let r = lw.len() - 1;
    let lo = pos.saturating_sub(r);
    let hi = (pos + r).min(len - 1);
    let term = |k: usize| lw[k.abs_diff(pos)] + val(k);
    let m = (lo..=hi).map(term).fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return m;
    }
    let s: f64 = (lo..=hi).map(|k| (term(k) - m).exp()).sum();
    m + s.ln()
}

fn dense_matvec(matrix: &[f64], v: &[f64]) -> Vec<f64> {
    let n = v.len();
    matrix
        .par_chunks(n)
        .map(|row| row.iter().zip(v).map(|(k, v)| k * v).sum())
        .collect()
}

fn dense_logsumexp(cost: &[f64], h: &[f64], log_weight: impl Fn(f64) -> f64 + Sync) -> Vec<f64> {
    let n = h.len();
    cost.par_chunks(n)
        .map(|row| {
            let m = row
                .iter()
                .zip(h)
                .map(|(&c, &h)| log_weight(c) + h)
                .fold(f64::NEG_INFINITY, f64::max);
            if m == f64::NEG_INFINITY {
                return m;
            }
            let s: f64 = row
                .iter()
                .zip(h)
                .map(|(&c, &h)| (log_weight(c) + h - m).exp())
                .sum();
            m + s.ln()
        })
        .collect()
}

#[inline]
pub(crate) fn log_add(a: f64, b: f64) -> f64 {
    let m = a.max(b);
    if m == f64::NEG_INFINITY {
        return m;
    }
    m + ((a - m).exp() + (b - m).exp()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::otcore::build_cost;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rel_inf(a: &[f64], b: &[f64]) -> f64 {
        let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        a.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs())) / scale
    }

    fn pair(eps: f64, g: GridGeometry) -> (Arc<GibbsKernel>, Arc<GibbsKernel>) {
        (
            GibbsKernel::new(KernelSpec::dense(eps), g).unwrap(),
            GibbsKernel::new(KernelSpec::convolutional(eps, &g), g).unwrap(),
        )
    }

    #[test]
    fn zero_maps_to_zero() {
        let g = GridGeometry::new(5, 4, 1.0).unwrap();
        let (d, c) = pair(1e-2, g);
        assert!(d.apply(&[0.0; 20]).iter().all(|&v| v == 0.0));
        assert!(c.apply(&[0.0; 20]).iter().all(|&v| v == 0.0));
    }

    #[test]
    fn delta_gives_dense_column() {
        let g = GridGeometry::new(8, 8, 1.0).unwrap();
        let (d, c) = pair(1e-2, g);
        let cost = build_cost(&g).unwrap();
        for k in [0, 9, 27, 63] {
            let mut delta = vec![0.0; 64];
            delta[k] = 1.0;
            let column: Vec<f64> = (0..64).map(|i| (-cost.get(i, k) / 1e-2).exp()).collect();
            assert!(rel_inf(&d.apply(&delta), &column) < 1e-15);
            assert!(rel_inf(&c.apply(&delta), &column) < 1e-12);
        }
    }

    #[test]
    fn convolution_matches_dense_on_random_field() {
        let g = GridGeometry::new(16, 16, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let v: Vec<f64> = (0..256).map(|_| rng.gen::<f64>()).collect();
        for eps in [1e-3, 1e-2, 1e-1] {
            let (d, c) = pair(eps, g);
            assert!(rel_inf(&c.apply(&v), &d.apply(&v)) <= 1e-8, "eps {eps}");
            assert!(rel_inf(&c.apply_cost_weighted(&v), &d.apply_cost_weighted(&v)) <= 1e-8);
        }
    }

    #[test]
    fn rectangular_grid_agrees() {
        let g = GridGeometry::new(9, 5, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let v: Vec<f64> = (0..45).map(|_| rng.gen::<f64>()).collect();
        let (d, c) = pair(2e-2, g);
        assert!(rel_inf(&c.apply(&v), &d.apply(&v)) <= 1e-12);
    }

    #[test]
    fn log_forms_match_linear() {
        let g = GridGeometry::new(12, 10, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..120).map(|_| rng.gen::<f64>() + 0.01).collect();
        let h: Vec<f64> = v.iter().map(|x| x.ln()).collect();
        let (d, c) = pair(5e-3, g);
        for k in [&d, &c] {
            let lin = k.apply(&v);
            let log: Vec<f64> = k.apply_log(&h).iter().map(|x| x.exp()).collect();
            assert!(rel_inf(&log, &lin) < 1e-12);
            let lin = k.apply_cost_weighted(&v);
            let log: Vec<f64> = k.apply_cost_weighted_log(&h).iter().map(|x| x.exp()).collect();
            assert!(rel_inf(&log, &lin) < 1e-12);
        }
    }

    #[test]
    fn checked_apply_rejects_nan() {
        let g = GridGeometry::new(2, 2, 1.0).unwrap();
        let k = GibbsKernel::new(KernelSpec::dense(1e-2), g).unwrap();
        assert!(matches!(
            kernel_apply(&[0.0, f64::NAN, 0.0, 0.0], &k),
            Err(Error::Numeric(_))
        ));
    }
}
