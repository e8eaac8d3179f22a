//! Per-pixel fields derived from a transport solution: transport distance,
//! barycentric displacement, velocity, incremental strain and its maximum
//! principal value.
//!
//! Missing values are `NaN` in memory and become the nodata sentinel when
//! written to disk.

use crate::error::{Error, Result};
use crate::otcore::{transport_cost_rows, wasserstein_value_unchecked, weighted_row_sums, ScalingPair};
use crate::raster::{GridGeometry, MassField};

/// Pixels whose mass is below this multiple of the floor carry no
/// meaningful transport information.
pub const LOW_MASS_FACTOR: f64 = 10.0;

fn validity(p: &MassField) -> Vec<bool> {
    let cutoff = LOW_MASS_FACTOR * p.floor();
    p.mass()
        .iter()
        .zip(p.mask())
        .map(|(&m, &ice)| ice && m >= cutoff)
        .collect()
}

fn check_shape(p: &MassField, pair: &ScalingPair) -> Result<()> {
    if p.geometry().same_shape(pair.geometry()) {
        Ok(())
    } else {
        Err(Error::Geometry("mass field differs from the scaling pair".into()))
    }
}

#[derive(Debug, Clone)]
pub struct TransportSummary {
    pub w_eps: f64,
    /// Expected squared normalized distance travelled by the mass leaving
    /// each pixel; `NaN` outside the valid set.
    pub cbar: Vec<f64>,
    pub mask: Vec<bool>,
}

impl TransportSummary {
    /// `√c̄ · norm_scale / dt`: the root-mean-square travel distance of each
    /// pixel's mass expressed as a speed in meters per second.
    pub fn speed(&self, geometry: &GridGeometry, dt: f64) -> Vec<f64> {
        let scale = geometry.norm_scale() / dt;
        self.cbar.iter().map(|c| c.sqrt() * scale).collect()
    }
}

/// `c̄_i = Σ_j γ_ij c_ij / p_i`, the conditional expected ground cost of the
/// mass leaving pixel `i`.
///
/// Pixels outside the ice mask or with less than [`LOW_MASS_FACTOR`] times
/// the floor mass are `NaN`. The pair is expected to be converged; `w_eps` is
/// reported regardless.
pub fn transport_distance(p: &MassField, q: &MassField, pair: &ScalingPair) -> Result<TransportSummary> {
    check_shape(p, pair)?;
    let rows = transport_cost_rows(p, pair)?;
    let mask = validity(p);
    let cbar = rows
        .iter()
        .zip(p.mass())
        .zip(&mask)
        .map(|((r, m), &ok)| if ok { r / m } else { f64::NAN })
        .collect();
    Ok(TransportSummary {
        w_eps: wasserstein_value_unchecked(p, q, pair)?,
        cbar,
        mask,
    })
}

/// Barycentric projection: where the mass of each source pixel lands on
/// average, in normalized coordinates.
#[derive(Debug, Clone)]
pub struct BarycentricMap {
    pub target_x: Vec<f64>,
    pub target_y: Vec<f64>,
    /// Pixels whose targets are meaningful (ice and above the mass cutoff).
    pub valid: Vec<bool>,
}

impl BarycentricMap {
    /// `Σ_i p_i · target_i` over all pixels, valid or not. Equals the target
    /// field's center of mass whenever the pair's column marginal is exact.
    pub fn transported_centroid(&self, p: &MassField) -> (f64, f64) {
        let dot = |t: &[f64]| t.iter().zip(p.mass()).map(|(t, m)| t * m).sum();
        (dot(&self.target_x), dot(&self.target_y))
    }
}

/// `target = (u ∘ ξ(w ∘ x)) ⊘ p`, and likewise for `y`.
pub fn barycentric_map(p: &MassField, pair: &ScalingPair) -> Result<BarycentricMap> {
    check_shape(p, pair)?;
    let g = pair.geometry();
    let project = |coord: Vec<f64>| -> Vec<f64> {
        weighted_row_sums(pair, &coord)
            .iter()
            .zip(p.mass())
            .map(|(s, m)| s / m)
            .collect()
    };
    Ok(BarycentricMap {
        target_x: project(g.x_coords()),
        target_y: project(g.y_coords()),
        valid: validity(p),
    })
}

impl BarycentricMap {
    /// Removes the entropic blur bias by subtracting the displacement of the
    /// self-transport map (`p` onto itself with the same kernel):
    /// `target − self_target + x`. Identical frames then map to the identity
    /// exactly, and the transported centroid is unchanged.
    pub fn debiased(&self, self_map: &BarycentricMap, geometry: &GridGeometry) -> Result<Self> {
        if self_map.target_x.len() != self.target_x.len() || self.target_x.len() != geometry.len() {
            return Err(Error::Geometry("barycentric maps differ in size".into()));
        }
        let correct = |t: &[f64], s: &[f64], x: Vec<f64>| -> Vec<f64> {
            t.iter().zip(s).zip(x).map(|((t, s), x)| t - s + x).collect()
        };
        Ok(Self {
            target_x: correct(&self.target_x, &self_map.target_x, geometry.x_coords()),
            target_y: correct(&self.target_y, &self_map.target_y, geometry.y_coords()),
            valid: self.valid.iter().zip(&self_map.valid).map(|(a, b)| *a && *b).collect(),
        })
    }
}

/// Per-pixel velocity in meters per second.
#[derive(Debug, Clone)]
pub struct VelocityField {
    pub vx: Vec<f64>,
    pub vy: Vec<f64>,
    pub dt: f64,
}

/// `v_i = (target_i − x_i) · norm_scale / dt`; invalid pixels are `NaN`.
pub fn velocity(map: &BarycentricMap, geometry: &GridGeometry, dt: f64) -> Result<VelocityField> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    if map.target_x.len() != geometry.len() {
        return Err(Error::Geometry("barycentric map differs from the grid".into()));
    }
    let scale = geometry.norm_scale() / dt;
    let displacement = |targets: &[f64], coords: Vec<f64>| -> Vec<f64> {
        targets
            .iter()
            .zip(coords)
            .zip(&map.valid)
            .map(|((t, c), &ok)| if ok { (t - c) * scale } else { f64::NAN })
            .collect()
    };
    Ok(VelocityField {
        vx: displacement(&map.target_x, geometry.x_coords()),
        vy: displacement(&map.target_y, geometry.y_coords()),
        dt,
    })
}

/// Symmetric incremental strain tensor per pixel.
#[derive(Debug, Clone)]
pub struct StrainField {
    pub exx: Vec<f64>,
    pub eyy: Vec<f64>,
    pub exy: Vec<f64>,
    /// Signed largest-magnitude eigenvalue.
    pub principal: Vec<f64>,
}

/// Second-order derivative along one axis: central in the interior,
/// one-sided three-point at both ends. Any `NaN` in a stencil yields `NaN`.
fn derivative(f: impl Fn(usize) -> f64, n: usize, spacing: f64, k: usize) -> f64 {
    let two_h = 2.0 * spacing;
    if k == 0 {
        (-3.0 * f(0) + 4.0 * f(1) - f(2)) / two_h
    } else if k == n - 1 {
        (3.0 * f(n - 1) - 4.0 * f(n - 2) + f(n - 3)) / two_h
    } else {
        (f(k + 1) - f(k - 1)) / two_h
    }
}

/// `ε = (dt / 2)(∇v + ∇vᵀ)` with derivatives taken on a grid of spacing
/// `pixel_size` meters.
pub fn strain(v: &VelocityField, geometry: &GridGeometry, dt: f64) -> Result<StrainField> {
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::Parameter(format!("time step must be positive, got {dt}")));
    }
    let (w, h) = (geometry.width(), geometry.height());
    if w < 3 || h < 3 {
        return Err(Error::Parameter(format!("strain needs at least a 3x3 grid, got {w}x{h}")));
    }
    if v.vx.len() != geometry.len() || v.vy.len() != geometry.len() {
        return Err(Error::Geometry("velocity field differs from the grid".into()));
    }
    let s = geometry.pixel_size();
    let n = geometry.len();
    let (mut exx, mut eyy, mut exy) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    for row in 0..h {
        for col in 0..w {
            let i = geometry.index(col, row);
            let along_x = |f: &[f64]| derivative(|c| f[geometry.index(c, row)], w, s, col);
            let along_y = |f: &[f64]| derivative(|r| f[geometry.index(col, r)], h, s, row);
            exx[i] = dt * along_x(&v.vx);
            eyy[i] = dt * along_y(&v.vy);
            exy[i] = 0.5 * dt * (along_y(&v.vx) + along_x(&v.vy));
        }
    }
    let principal = exx
        .iter()
        .zip(&eyy)
        .zip(&exy)
        .map(|((&a, &b), &c)| principal_value(a, b, c))
        .collect();
    Ok(StrainField {
        exx,
        eyy,
        exy,
        principal,
    })
}

/// Eigenvalue of `[[exx, exy], [exy, eyy]]` with the larger magnitude,
/// sign kept; the positive one on an exact tie.
pub fn principal_value(exx: f64, eyy: f64, exy: f64) -> f64 {
    let mean = 0.5 * (exx + eyy);
    let radius = (0.5 * (exx - eyy)).hypot(exy);
    let (hi, lo) = (mean + radius, mean - radius);
    if hi.abs() >= lo.abs() {
        hi
    } else {
        lo
    }
}

/// Maximum principal strain per pixel, optionally clipped to `[-bound, bound]`.
pub fn principal_strain(s: &StrainField, clip: Option<f64>) -> Vec<f64> {
    s.exx
        .iter()
        .zip(&s.eyy)
        .zip(&s.exy)
        .map(|((&a, &b), &c)| {
            let v = principal_value(a, b, c);
            match clip {
                Some(bound) => v.clamp(-bound, bound),
                None => v,
            }
        })
        .collect()
}
