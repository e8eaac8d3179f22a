use super::cost::CostMatrix;
use super::sinkhorn::{ScalingPair, Stabilization};
use crate::error::{Error, Result};
use crate::raster::MassField;

/// Explicit coupling matrix for small grids.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseCoupling {
    size: usize,
    entries: Vec<f64>,
}

impl DenseCoupling {
    pub fn size(&self) -> usize {
        self.size
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.entries.chunks(self.size).map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.size];
        for row in self.entries.chunks(self.size) {
            out.iter_mut().zip(row).for_each(|(o, v)| *o += v);
        }
        out
    }

    pub fn total(&self) -> f64 {
        self.entries.iter().sum()
    }

    /// `Σ c_ij γ_ij`
    pub fn transport_cost(&self, cost: &CostMatrix) -> f64 {
        self.entries.iter().zip(cost.entries()).map(|(g, c)| g * c).sum()
    }

    /// `-Σ γ_ij log γ_ij`, with `0 log 0 = 0`.
    pub fn entropy(&self) -> f64 {
        -self
            .entries
            .iter()
            .filter(|&&g| g > 0.0)
            .map(|g| g * g.ln())
            .sum::<f64>()
    }
}

/// `γ = diag(u) exp(-c/ε) diag(w)` for a converged pair.
pub fn dense_coupling(pair: &ScalingPair, cost: &CostMatrix) -> Result<DenseCoupling> {
    pair.require_converged()?;
    if !cost.geometry().same_shape(pair.geometry()) {
        return Err(Error::Geometry("cost matrix and scaling pair differ in shape".into()));
    }
    let n = cost.size();
    let eps = pair.epsilon();
    let (lu, lw) = (pair.log_u(), pair.log_w());
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        entries.extend(
            cost.row(i)
                .iter()
                .zip(lw)
                .map(|(c, w)| (lu[i] - c / eps + w).exp()),
        );
    }
    Ok(DenseCoupling { size: n, entries })
}

/// Regularized transport cost `W_ε = ε (⟨p, log u⟩ + ⟨q, log w⟩)`.
///
/// At `γ = diag(u) ξ diag(w)` with marginals `p` and `q` this equals
/// `Σ c_ij γ_ij − ε H(γ)` without touching the cost matrix.
pub fn wasserstein_value(p: &MassField, q: &MassField, pair: &ScalingPair) -> Result<f64> {
    pair.require_converged()?;
    wasserstein_value_unchecked(p, q, pair)
}

/// [`wasserstein_value`] without the convergence check, for reporting
/// diagnostics of solves that hit the iteration cap.
pub fn wasserstein_value_unchecked(p: &MassField, q: &MassField, pair: &ScalingPair) -> Result<f64> {
    if p.len() != pair.log_u().len() || q.len() != pair.log_w().len() {
        return Err(Error::Geometry("mass fields differ from the scaling pair".into()));
    }
    let dot = |m: &[f64], l: &[f64]| -> f64 { m.iter().zip(l).map(|(m, l)| m * l).sum() };
    Ok(pair.epsilon() * (dot(p.mass(), pair.log_u()) + dot(q.mass(), pair.log_w())))
}

/// `u ∘ ξ(w ∘ f)` for a nonnegative per-pixel weight `f`, i.e. the row sums
/// `Σ_j γ_ij f_j`.
pub fn weighted_row_sums(pair: &ScalingPair, f: &[f64]) -> Vec<f64> {
    let k = pair.kernel();
    match pair.stabilization {
        Stabilization::Plain => {
            let u = pair.u();
            let wf: Vec<f64> = pair.log_w().iter().zip(f).map(|(l, f)| l.exp() * f).collect();
            k.apply(&wf).iter().zip(&u).map(|(a, u)| a * u).collect()
        }
        Stabilization::LogDomain => {
            let h: Vec<f64> = pair.log_w().iter().zip(f).map(|(l, f)| l + f.ln()).collect();
            k.apply_log(&h)
                .iter()
                .zip(pair.log_u())
                .map(|(a, u)| (a + u).exp())
                .collect()
        }
    }
}

/// Per-pixel outgoing transport cost `Σ_j γ_ij c_ij`.
///
/// The convolutional kernel evaluates this directly with the kernels
/// `ξ·dx²` and `ξ·dy²`, so there is no cancellation between large terms.
pub fn transport_cost_rows(p: &MassField, pair: &ScalingPair) -> Result<Vec<f64>> {
    if !p.geometry().same_shape(pair.geometry()) {
        return Err(Error::Geometry("mass field differs from the scaling pair".into()));
    }
    let k = pair.kernel();
    let rows = match pair.stabilization {
        Stabilization::Plain => {
            let u = pair.u();
            k.apply_cost_weighted(&pair.w())
                .iter()
                .zip(&u)
                .map(|(a, u)| a * u)
                .collect()
        }
        Stabilization::LogDomain => k
            .apply_cost_weighted_log(pair.log_w())
            .iter()
            .zip(pair.log_u())
            .map(|(a, u)| (a + u).exp())
            .collect(),
    };
    Ok(rows)
}
