use crate::error::{Error, Result};
use crate::raster::GridGeometry;

/// Largest grid for which explicit `N×N` matrices are built.
pub const DENSE_LIMIT: usize = 4096;

/// Squared Euclidean distances between normalized pixel centers.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    geometry: GridGeometry,
    entries: Vec<f64>,
}

impl CostMatrix {
    pub fn geometry(&self) -> &GridGeometry {
        &self.geometry
    }

    /// Number of pixels `N`; the matrix is `N×N`.
    pub fn size(&self) -> usize {
        self.geometry.len()
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size() + j]
    }

    /// Row-major entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.size();
        &self.entries[i * n..(i + 1) * n]
    }
}

pub fn build_cost(geometry: &GridGeometry) -> Result<CostMatrix> {
    let n = geometry.len();
    if n > DENSE_LIMIT {
        return Err(Error::Scale {
            what: "dense cost matrices",
            pixels: n,
            limit: DENSE_LIMIT,
            hint: "use the convolutional kernel mode",
        });
    }
    let centers: Vec<(f64, f64)> = (0..n).map(|i| geometry.center(i)).collect();
    let mut entries = Vec::with_capacity(n * n);
    for &(xi, yi) in &centers {
        for &(xj, yj) in &centers {
            entries.push((xi - xj).powi(2) + (yi - yj).powi(2));
        }
    }
    Ok(CostMatrix {
        geometry: *geometry,
        entries,
    })
}
