//! Windowed zero-normalized cross-correlation, the classical baseline for
//! image-pair displacement estimation.

use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::raster::IntensityRaster;

/// Correlation threshold below which matches are discarded.
pub const DEFAULT_THRESHOLD: f64 = 0.25;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NccParams {
    /// Side of the square correlation window, in pixels.
    pub window: usize,
    /// Largest displacement searched along each axis, in pixels.
    pub search_radius: usize,
    pub threshold: f64,
    /// Step between consecutive windows, in pixels.
    pub stride: usize,
}

impl NccParams {
    /// Non-overlapping windows searched up to half a window in each direction.
    pub fn new(window: usize) -> Self {
        Self {
            window,
            search_radius: window / 2,
            threshold: DEFAULT_THRESHOLD,
            stride: window,
        }
    }
}

/// Best integer shift of one source window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NccMatch {
    /// Window center in pixel coordinates (column, row).
    pub center: (f64, f64),
    /// `tgt(x + dx, y + dy)` best matches `src(x, y)`.
    pub displacement: (i64, i64),
    pub correlation: f64,
}

impl NccMatch {
    /// Displacement expressed as a velocity in meters per second.
    pub fn velocity(&self, pixel_size: f64, dt: f64) -> (f64, f64) {
        let s = pixel_size / dt;
        (self.displacement.0 as f64 * s, self.displacement.1 as f64 * s)
    }
}

/// Correlates every `window`×`window` tile of `src` (stepping by `stride`)
/// against all integer shifts of up to `search_radius` in `tgt` that keep the
/// shifted window inside the image.
///
/// Tiles without intensity variance are skipped, as are shifts landing on a
/// flat target window. A tile reports its best shift only when the peak
/// correlation reaches `threshold`; ties keep the first shift in row-major
/// order of `(dy, dx)`. Output is ordered by tile.
pub fn ncc_displacements(
    src: &IntensityRaster,
    tgt: &IntensityRaster,
    params: &NccParams,
) -> Result<Vec<NccMatch>> {
    let g = src.geometry();
    if !g.same_shape(tgt.geometry()) {
        return Err(Error::Geometry("source and target rasters differ in shape".into()));
    }
    let NccParams {
        window,
        search_radius,
        threshold,
        stride,
    } = *params;
    if window < 8 || window > g.width().min(g.height()) {
        return Err(Error::Parameter(format!(
            "window {window} must lie in [8, {}]",
            g.width().min(g.height())
        )));
    }
    if search_radius == 0 || stride == 0 {
        return Err(Error::Parameter("search radius and stride must be positive".into()));
    }
    if !(-1.0..=1.0).contains(&threshold) {
        return Err(Error::Parameter(format!("threshold {threshold} outside [-1, 1]")));
    }

    let (w, h) = (g.width() as i64, g.height() as i64);
    let win = window as i64;
    let radius = search_radius as i64;
    let tiles: Vec<(i64, i64)> = (0..=h - win)
        .step_by(stride)
        .flat_map(|y| (0..=w - win).step_by(stride).map(move |x| (x, y)))
        .collect();

    let window_at = |img: &IntensityRaster, x0: i64, y0: i64| -> Vec<f64> {
        (y0..y0 + win)
            .flat_map(|y| (x0..x0 + win).map(move |x| img.get(x as usize, y as usize)))
            .collect()
    };

    let matches = tiles
        .par_iter()
        .filter_map(|&(x0, y0)| {
            let a = centered(window_at(src, x0, y0))?;
            let mut best: Option<((i64, i64), f64)> = None;
            for dy in -radius..=radius {
                for dx in -radius..=radius {
                    let (tx, ty) = (x0 + dx, y0 + dy);
                    if tx < 0 || ty < 0 || tx + win > w || ty + win > h {
                        continue;
                    }
                    let Some(b) = centered(window_at(tgt, tx, ty)) else {
                        continue;
                    };
                    let cov: f64 = a.values.iter().zip(&b.values).map(|(x, y)| x * y).sum();
                    let r = (cov / (a.norm * b.norm)).clamp(-1.0, 1.0);
                    if best.is_none_or(|(_, top)| r > top) {
                        best = Some(((dx, dy), r));
                    }
                }
            }
            let (displacement, correlation) = best?;
            (correlation >= threshold).then(|| NccMatch {
                center: (
                    x0 as f64 + (win - 1) as f64 / 2.0,
                    y0 as f64 + (win - 1) as f64 / 2.0,
                ),
                displacement,
                correlation,
            })
        })
        .collect();
    Ok(matches)
}

struct Centered {
    values: Vec<f64>,
    norm: f64,
}

/// Mean-removed window and its Euclidean norm; `None` when flat.
fn centered(mut values: Vec<f64>) -> Option<Centered> {
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    values.iter_mut().for_each(|v| *v -= mean);
    let norm = values.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = mean.abs().max(1.0) * (values.len() as f64).sqrt();
    (norm > 1e-12 * scale).then_some(Centered { values, norm })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::GridGeometry;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn noise(w: usize, h: usize, seed: u64) -> IntensityRaster {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let g = GridGeometry::new(w, h, 250.0).unwrap();
        let v = (0..w * h).map(|_| rng.gen_range(0..=255) as f64).collect();
        IntensityRaster::new(g, v, 0.0).unwrap()
    }

    fn shifted(src: &IntensityRaster, dx: i64, dy: i64) -> IntensityRaster {
        let g = *src.geometry();
        let (w, h) = (g.width() as i64, g.height() as i64);
        let v = (0..h)
            .flat_map(|y| (0..w).map(move |x| (x, y)))
            .map(|(x, y)| {
                let (sx, sy) = (x - dx, y - dy);
                if (0..w).contains(&sx) && (0..h).contains(&sy) {
                    src.get(sx as usize, sy as usize)
                } else {
                    0.0
                }
            })
            .collect();
        src.with_values(v).unwrap()
    }

    #[test]
    fn recovers_exact_shift() {
        let src = noise(64, 64, 1);
        let tgt = shifted(&src, 3, -2);
        let params = NccParams::new(16);
        let found = ncc_displacements(&src, &tgt, &params).unwrap();
        // Tiles whose shifted window stays inside the image and clear of the
        // zero fill: x0 in {0, 16, 32}, y0 in {16, 32, 48}.
        let interior: Vec<_> = found
            .iter()
            .filter(|m| m.center.0 < 40.0 && m.center.1 > 8.0)
            .collect();
        assert_eq!(interior.len(), 9);
        for m in interior {
            assert_eq!(m.displacement, (3, -2));
            assert!((m.correlation - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn flat_tiles_are_skipped() {
        let g = GridGeometry::new(32, 32, 1.0).unwrap();
        let flat = IntensityRaster::new(g, vec![7.0; 1024], 0.0).unwrap();
        let found = ncc_displacements(&flat, &noise(32, 32, 3), &NccParams::new(16)).unwrap();
        assert!(found.is_empty());
    }

    #[test]
    fn threshold_is_respected_on_noise() {
        let src = noise(96, 96, 4);
        let tgt = noise(96, 96, 5);
        let params = NccParams::new(12);
        for m in ncc_displacements(&src, &tgt, &params).unwrap() {
            assert!(m.correlation >= 0.25);
            assert!(m.displacement.0.unsigned_abs() <= 6 && m.displacement.1.unsigned_abs() <= 6);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let src = noise(32, 32, 6);
        assert!(ncc_displacements(&src, &src, &NccParams::new(40)).is_err());
        assert!(ncc_displacements(&src, &src, &NccParams::new(4)).is_err());
        let other = noise(32, 31, 6);
        assert!(ncc_displacements(&src, &other, &NccParams::new(8)).is_err());
    }

    #[test]
    fn velocity_units() {
        let m = NccMatch {
            center: (0.0, 0.0),
            displacement: (4, -2),
            correlation: 1.0,
        };
        let (vx, vy) = m.velocity(250.0, 86400.0);
        assert!((vx - 1000.0 / 86400.0).abs() < 1e-15);
        assert!((vy + 500.0 / 86400.0).abs() < 1e-15);
    }
}
