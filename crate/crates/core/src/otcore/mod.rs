//! Entropy-regularized optimal transport between two mass fields on the same
//! grid, with a squared Euclidean ground cost.
//!
//! The coupling is never stored at scale. It is represented implicitly as
//! `diag(u) · ξ · diag(w)` where `ξ = exp(-c / epsilon)` is the Gibbs kernel,
//! and every derived quantity is a handful of kernel applications.

mod cost;
mod kernel;
mod sinkhorn;
mod value;

pub use cost::{build_cost, CostMatrix, DENSE_LIMIT};
pub use kernel::{kernel_apply, GibbsKernel};
pub use sinkhorn::{sinkhorn, ScalingPair, SinkhornOptions, Stabilization};
pub use value::{
    dense_coupling, transport_cost_rows, wasserstein_value, wasserstein_value_unchecked,
    weighted_row_sums, DenseCoupling,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::raster::GridGeometry;

/// Relative weight of the last retained convolution tap.
pub const TRUNCATION_WEIGHT: f64 = 1e-16;

/// How the kernel acts on a vector.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelMode {
    /// Explicit `N×N` matrix; only for small grids.
    Dense,
    /// Separable truncated 1-D Gaussian passes along x then y.
    Convolutional { truncation_radius: usize },
}

/// Regularization strength plus kernel representation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelSpec {
    pub epsilon: f64,
    pub mode: KernelMode,
}

impl KernelSpec {
    pub fn dense(epsilon: f64) -> Self {
        Self {
            epsilon,
            mode: KernelMode::Dense,
        }
    }

    /// Convolutional kernel truncated at the smallest radius whose boundary
    /// weight is at most [`TRUNCATION_WEIGHT`] of the center weight.
    pub fn convolutional(epsilon: f64, geometry: &GridGeometry) -> Self {
        Self {
            epsilon,
            mode: KernelMode::Convolutional {
                truncation_radius: min_truncation_radius(epsilon, geometry),
            },
        }
    }

    /// Dense up to [`DENSE_LIMIT`] pixels, convolutional above.
    pub fn auto(epsilon: f64, geometry: &GridGeometry) -> Self {
        if geometry.len() <= DENSE_LIMIT {
            Self::dense(epsilon)
        } else {
            Self::convolutional(epsilon, geometry)
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self.mode, KernelMode::Dense)
    }

    pub(crate) fn validate(&self, geometry: &GridGeometry) -> Result<()> {
        if !(self.epsilon.is_finite() && self.epsilon > 0.0) {
            return Err(Error::Parameter(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if let KernelMode::Convolutional { truncation_radius } = self.mode {
            let min = min_truncation_radius(self.epsilon, geometry);
            if truncation_radius < min {
                return Err(Error::Parameter(format!(
                    "truncation radius {truncation_radius} is below the minimum {min} for epsilon {}",
                    self.epsilon
                )));
            }
        }
        Ok(())
    }
}

/// Smallest `r ≥ 1` with `exp(-(r·h)² / epsilon) ≤ 1e-16`, `h` the normalized
/// pixel pitch.
pub fn min_truncation_radius(epsilon: f64, geometry: &GridGeometry) -> usize {
    let reach = (epsilon * -TRUNCATION_WEIGHT.ln()).sqrt();
    ((reach / geometry.pitch()).ceil() as usize).max(1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn truncation_radius_bounds_boundary_weight() {
        for (eps, n) in [(1e-3, 128), (1e-2, 16), (1e-4, 64), (1.0, 8)] {
            let g = GridGeometry::new(n, n, 1.0).unwrap();
            let r = min_truncation_radius(eps, &g);
            let h = g.pitch();
            let weight = |k: usize| (-(k as f64 * h).powi(2) / eps).exp();
            assert!(weight(r) <= TRUNCATION_WEIGHT * 1.000001, "eps {eps} n {n}");
            assert!(r == 1 || weight(r - 1) > TRUNCATION_WEIGHT);
            let sigma_px = (eps / 2.0).sqrt() * n as f64;
            assert!(r as f64 >= sigma_px * (32.0 * 10f64.ln()).sqrt() - 1e-9);
        }
    }

    #[test]
    fn auto_switches_at_dense_limit() {
        let small = GridGeometry::new(64, 64, 1.0).unwrap();
        let large = GridGeometry::new(65, 64, 1.0).unwrap();
        assert!(KernelSpec::auto(1e-3, &small).is_dense());
        assert!(!KernelSpec::auto(1e-3, &large).is_dense());
    }

    #[test]
    fn rejects_short_radius() {
        let g = GridGeometry::new(32, 32, 1.0).unwrap();
        let spec = KernelSpec {
            epsilon: 1e-2,
            mode: KernelMode::Convolutional {
                truncation_radius: 2,
            },
        };
        assert!(spec.validate(&g).is_err());
        assert!(KernelSpec::dense(0.0).validate(&g).is_err());
    }
}
