use super::{GridGeometry, IntensityRaster};
use crate::error::{Error, Result};

/// Tolerance on the total of a normalized mass field.
pub const MASS_SUM_TOL: f64 = 1e-12;

/// A strictly positive probability mass function over the pixel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MassField {
    geometry: GridGeometry,
    mass: Vec<f64>,
    mask: Vec<bool>,
    floor: f64,
}

impl MassField {
    /// Wraps already-normalized masses. Every entry must be at least `floor`,
    /// which must be positive, and the total must be 1 within
    /// [`MASS_SUM_TOL`]. The mask is all-true.
    pub fn from_mass(geometry: GridGeometry, mass: Vec<f64>, floor: f64) -> Result<Self> {
        if mass.len() != geometry.len() {
            return Err(Error::Geometry(format!(
                "{} masses for {} pixels",
                mass.len(),
                geometry.len()
            )));
        }
        if !(floor > 0.0) || mass.iter().any(|m| !(m.is_finite() && *m >= floor)) {
            return Err(Error::DegenerateInput(
                "mass must be finite and no smaller than a positive floor".into(),
            ));
        }
        let total: f64 = mass.iter().sum();
        if (total - 1.0).abs() > MASS_SUM_TOL {
            return Err(Error::Balance {
                source_total: total,
                target_total: 1.0,
            });
        }
        let mask = vec![true; mass.len()];
        Ok(Self {
            geometry,
            mass,
            mask,
            floor,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    /// Per-pixel mass contributed by the background floor alone.
    pub fn floor(&self) -> f64 {
        self.floor
    }

    pub fn len(&self) -> usize {
        self.mass.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mass.is_empty()
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Result<Self> {
        if mask.len() != self.mass.len() {
            return Err(Error::Geometry("mask length differs from grid".into()));
        }
        self.mask = mask;
        Ok(self)
    }
}

/// `mask[i] = values[i] > threshold`.
pub fn apply_ice_mask(raster: &IntensityRaster, threshold: f64) -> Vec<bool> {
    raster.values().iter().map(|&v| v > threshold).collect()
}

/// Normalizes a raster into a mass field after adding a background floor
/// relative to the total intensity: `mass_i ∝ values_i + floor · Σ values`.
///
/// The mask is carried through when given, otherwise every pixel is valid.
pub fn normalize_to_mass(
    raster: &IntensityRaster,
    floor: f64,
    mask: Option<&[bool]>,
) -> Result<MassField> {
    if !(floor.is_finite() && floor > 0.0) {
        return Err(Error::Parameter(format!("floor must be positive, got {floor}")));
    }
    let geometry = *raster.geometry();
    let mask = match mask {
        Some(m) if m.len() != geometry.len() => {
            return Err(Error::Geometry("mask length differs from grid".into()))
        }
        Some(m) => m.to_vec(),
        None => vec![true; geometry.len()],
    };

    let total: f64 = raster.values().iter().sum();
    if total <= 0.0 {
        return Err(Error::DegenerateInput("image has no positive intensity".into()));
    }
    let offset = floor * total;
    let mut mass: Vec<f64> = raster.values().iter().map(|&v| v + offset).collect();
    let norm: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= norm);

    Ok(MassField {
        geometry,
        mass,
        mask,
        floor: offset / norm,
    })
}
