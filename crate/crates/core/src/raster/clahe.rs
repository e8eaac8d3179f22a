use super::IntensityRaster;
use crate::error::{Error, Result};

const BINS: usize = 256;

/// Per-tile gray-level lookup tables with bilinear blending between tile
/// centers.
pub(crate) struct TileMaps {
    tile: usize,
    tiles_x: usize,
    tiles_y: usize,
    luts: Vec<[f64; BINS]>,
}

#[inline]
fn bin(v: f64) -> usize {
    (v.floor().max(0.0) as usize).min(BINS - 1)
}

impl TileMaps {
    pub(crate) fn build(raster: &IntensityRaster, tile: usize, clip_limit: f64, mask: Option<&[bool]>) -> Self {
        let g = raster.geometry();
        let (w, h) = (g.width(), g.height());
        let tiles_x = w.div_ceil(tile);
        let tiles_y = h.div_ceil(tile);
        let mut luts = Vec::with_capacity(tiles_x * tiles_y);

        for ty in 0..tiles_y {
            for tx in 0..tiles_x {
                let mut hist = [0.0f64; BINS];
                let mut count = 0usize;
                for row in ty * tile..((ty + 1) * tile).min(h) {
                    for col in tx * tile..((tx + 1) * tile).min(w) {
                        let i = g.index(col, row);
                        if mask.is_none_or(|m| m[i]) {
                            hist[bin(raster.values()[i])] += 1.0;
                            count += 1;
                        }
                    }
                }
                luts.push(tile_lut(&mut hist, count, clip_limit));
            }
        }
        Self {
            tile,
            tiles_x,
            tiles_y,
            luts,
        }
    }

    pub(crate) fn lut(&self, tx: usize, ty: usize) -> &[f64; BINS] {
        &self.luts[ty * self.tiles_x + tx]
    }

    /// Equalized value of intensity `value` located at `(col, row)`.
    pub(crate) fn map(&self, col: usize, row: usize, value: f64) -> f64 {
        let (x0, x1, ax) = neighbors(col, self.tile, self.tiles_x);
        let (y0, y1, ay) = neighbors(row, self.tile, self.tiles_y);
        let b = bin(value);
        let top = (1.0 - ax) * self.lut(x0, y0)[b] + ax * self.lut(x1, y0)[b];
        let bottom = (1.0 - ax) * self.lut(x0, y1)[b] + ax * self.lut(x1, y1)[b];
        (1.0 - ay) * top + ay * bottom
    }
}

/// Neighboring tile indices and blend weight along one axis.
fn neighbors(pos: usize, tile: usize, tiles: usize) -> (usize, usize, f64) {
    let f = (pos as f64 + 0.5) / tile as f64 - 0.5;
    if f <= 0.0 {
        return (0, 0, 0.0);
    }
    let t0 = f.floor() as usize;
    if t0 + 1 >= tiles {
        return (tiles - 1, tiles - 1, 0.0);
    }
    (t0, t0 + 1, f - t0 as f64)
}

fn tile_lut(hist: &mut [f64; BINS], count: usize, clip_limit: f64) -> [f64; BINS] {
    let mut lut = [0.0; BINS];
    if count == 0 {
        for (b, v) in lut.iter_mut().enumerate() {
            *v = b as f64;
        }
        return lut;
    }
    let limit = clip_limit * count as f64 / BINS as f64;
    let mut excess = 0.0;
    for h in hist.iter_mut() {
        if *h > limit {
            excess += *h - limit;
            *h = limit;
        }
    }
    let share = excess / BINS as f64;
    let scale = 255.0 / count as f64;
    let mut cdf = 0.0;
    for (h, v) in hist.iter().zip(lut.iter_mut()) {
        cdf += h + share;
        *v = (cdf * scale).min(255.0);
    }
    lut
}

/// Contrast-limited adaptive histogram equalization.
///
/// The image is cut into `tile`×`tile` blocks. Each block's histogram is
/// clipped at `clip_limit · n / 256` (with `n` the number of contributing
/// pixels), the clipped excess is spread evenly over all bins, and the
/// cumulative histogram becomes that block's gray-level map. Pixels blend the
/// maps of the four nearest block centers bilinearly.
///
/// When `mask` is given only pixels with `mask[i] == true` contribute to the
/// histograms and get remapped; the rest keep their raw values.
pub fn equalize_contrast(
    raster: &IntensityRaster,
    tile: usize,
    clip_limit: f64,
    mask: Option<&[bool]>,
) -> Result<IntensityRaster> {
    let g = raster.geometry();
    if tile < 2 || tile > g.width().min(g.height()) {
        return Err(Error::Parameter(format!(
            "tile size {tile} must lie in [2, {}]",
            g.width().min(g.height())
        )));
    }
    if !(clip_limit.is_finite() && clip_limit > 0.0) {
        return Err(Error::Parameter(format!("clip limit must be positive, got {clip_limit}")));
    }
    if mask.is_some_and(|m| m.len() != g.len()) {
        return Err(Error::Geometry("mask length differs from grid".into()));
    }

    let maps = TileMaps::build(raster, tile, clip_limit, mask);
    let mut out = raster.values().to_vec();
    for row in 0..g.height() {
        for col in 0..g.width() {
            let i = g.index(col, row);
            if mask.is_none_or(|m| m[i]) {
                out[i] = maps.map(col, row, out[i]);
            }
        }
    }
    raster.with_values(out)
}
