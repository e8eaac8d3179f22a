//! Single-band rasters, grid geometry, preprocessing and normalization into
//! probability mass fields.

mod clahe;
pub mod io;
mod mass;

pub use clahe::equalize_contrast;
pub use mass::{apply_ice_mask, normalize_to_mass, MassField};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default ice/water intensity threshold.
pub const DEFAULT_ICE_THRESHOLD: f64 = 120.0;

/// Default background floor added before normalization.
pub const DEFAULT_FLOOR: f64 = 1e-10;

/// Pixel grid shared by every field derived from an image pair.
///
/// Pixels are square. Pixel `(col, row)` has its center at
/// `((col + 0.5) / L, (row + 0.5) / L)` in normalized coordinates, with
/// `L = max(width, height)`, so the longer axis spans `[0, 1]` edge to edge.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridGeometry {
    width: usize,
    height: usize,
    pixel_size: f64,
}

impl GridGeometry {
    pub fn new(width: usize, height: usize, pixel_size: f64) -> Result<Self> {
        if width == 0 || height == 0 || width * height < 2 {
            return Err(Error::Parameter(format!(
                "grid must hold at least two pixels, got {width}x{height}"
            )));
        }
        if !(pixel_size.is_finite() && pixel_size > 0.0) {
            return Err(Error::Parameter(format!(
                "pixel size must be positive, got {pixel_size}"
            )));
        }
        Ok(Self {
            width,
            height,
            pixel_size,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Number of pixels.
    pub fn len(&self) -> usize {
        self.width * self.height
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Meters per pixel.
    pub fn pixel_size(&self) -> f64 {
        self.pixel_size
    }

    /// Pixels along the longer axis.
    pub fn long_side(&self) -> usize {
        self.width.max(self.height)
    }

    /// Meters corresponding to one unit of normalized length.
    pub fn norm_scale(&self) -> f64 {
        self.long_side() as f64 * self.pixel_size
    }

    /// Distance between adjacent pixel centers in normalized units.
    pub fn pitch(&self) -> f64 {
        1.0 / self.long_side() as f64
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.width + col
    }

    /// Normalized center of pixel `index`.
    pub fn center(&self, index: usize) -> (f64, f64) {
        let col = index % self.width;
        let row = index / self.width;
        let h = self.pitch();
        ((col as f64 + 0.5) * h, (row as f64 + 0.5) * h)
    }

    /// Normalized x coordinate of every pixel center, row-major.
    pub fn x_coords(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.center(i).0).collect()
    }

    /// Normalized y coordinate of every pixel center, row-major.
    pub fn y_coords(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.center(i).1).collect()
    }

    pub fn same_shape(&self, other: &GridGeometry) -> bool {
        self.width == other.width && self.height == other.height
    }
}

/// Raw single-band intensities with acquisition metadata.
#[derive(Debug, Clone, PartialEq)]
pub struct IntensityRaster {
    geometry: GridGeometry,
    values: Vec<f64>,
    timestamp: f64,
}

impl IntensityRaster {
    /// `values` are row-major, finite and nonnegative; `timestamp` is in
    /// seconds since the epoch.
    pub fn new(geometry: GridGeometry, values: Vec<f64>, timestamp: f64) -> Result<Self> {
        if values.len() != geometry.len() {
            return Err(Error::Parameter(format!(
                "expected {} values for a {}x{} grid, got {}",
                geometry.len(),
                geometry.width(),
                geometry.height(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Parameter(format!(
                "intensities must be finite and nonnegative, found {v}"
            )));
        }
        Ok(Self {
            geometry,
            values,
            timestamp,
        })
    }

    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn timestamp(&self) -> f64 {
        self.timestamp
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.geometry, values, self.timestamp)
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> f64 {
        self.values[self.geometry.index(col, row)]
    }
}
