//! File formats: 8-bit binary PGM input with a JSON metadata sidecar, and
//! little-endian `f32` field rasters with a JSON shape sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{GridGeometry, IntensityRaster};
use crate::error::{Error, Result};

/// Sentinel written in place of missing values in `f32` rasters.
pub const NODATA: f32 = -3.4e38;

/// Acquisition metadata stored next to each PGM frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrameMeta {
    pub pixel_size_m: f64,
    pub timestamp_s: f64,
}

/// Shape sidecar of an `f32` field raster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub width: usize,
    pub height: usize,
    pub dtype: String,
    pub nodata: f64,
}

/// Sidecar path convention for field rasters: `<file>.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Loads a P5 PGM and its JSON sidecar.
pub fn load_raster(path: impl AsRef<Path>, meta_path: impl AsRef<Path>) -> Result<IntensityRaster> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let (width, height, payload) = parse_pgm(&bytes)?;

    let meta_path = meta_path.as_ref();
    let text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta = parse_frame_meta(&text)?;

    let geometry = GridGeometry::new(width, height, meta.pixel_size_m)
        .map_err(|e| Error::Metadata(e.to_string()))?;
    IntensityRaster::new(
        geometry,
        payload.iter().map(|&b| f64::from(b)).collect(),
        meta.timestamp_s,
    )
}

pub fn parse_frame_meta(text: &str) -> Result<FrameMeta> {
    let meta: FrameMeta =
        serde_json::from_str(text).map_err(|e| Error::Metadata(e.to_string()))?;
    if !(meta.pixel_size_m.is_finite() && meta.pixel_size_m > 0.0) {
        return Err(Error::Metadata(format!(
            "pixel_size_m must be positive, got {}",
            meta.pixel_size_m
        )));
    }
    if !meta.timestamp_s.is_finite() {
        return Err(Error::Metadata("timestamp_s must be finite".into()));
    }
    Ok(meta)
}

/// Decodes a binary PGM, returning `(width, height, pixels)`.
pub fn parse_pgm(bytes: &[u8]) -> Result<(usize, usize, &[u8])> {
    let mut pos = 0;
    let magic = header_token(bytes, &mut pos)?;
    if magic != b"P5" {
        return Err(Error::Format("missing P5 magic number".into()));
    }
    let width = header_number(bytes, &mut pos, "width")?;
    let height = header_number(bytes, &mut pos, "height")?;
    let maxval = header_number(bytes, &mut pos, "maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("only maxval 255 is supported, got {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(pos) {
        Some(b) if b.is_ascii_whitespace() => pos += 1,
        _ => return Err(Error::Format("header not terminated by whitespace".into())),
    }
    let expected = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let payload = &bytes[pos..];
    if payload.len() != expected {
        return Err(Error::Truncation {
            expected,
            found: payload.len(),
        });
    }
    Ok((width, height, payload))
}

fn header_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        match bytes.get(*pos) {
            Some(b'#') => {
                while let Some(&b) = bytes.get(*pos) {
                    *pos += 1;
                    if b == b'\n' || b == b'\r' {
                        break;
                    }
                }
            }
            Some(b) if b.is_ascii_whitespace() => *pos += 1,
            Some(_) => break,
            None => return Err(Error::Format("unexpected end of header".into())),
        }
    }
    let start = *pos;
    while matches!(bytes.get(*pos), Some(b) if !b.is_ascii_whitespace()) {
        *pos += 1;
    }
    Ok(&bytes[start..*pos])
}

fn header_number(bytes: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let token = header_token(bytes, pos)?;
    std::str::from_utf8(token)
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::Format(format!("invalid {what} in header")))
}

/// Encodes intensities as P5 bytes, rounding and clamping to `[0, 255]`.
pub fn encode_pgm(raster: &IntensityRaster) -> Vec<u8> {
    let g = raster.geometry();
    let mut out = format!("P5\n{} {}\n255\n", g.width(), g.height()).into_bytes();
    out.extend(raster.values().iter().map(|v| v.round().clamp(0.0, 255.0) as u8));
    out
}

/// Writes `raster` as a PGM plus its metadata sidecar.
pub fn save_raster(
    raster: &IntensityRaster,
    path: impl AsRef<Path>,
    meta_path: impl AsRef<Path>,
) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_pgm(raster)).map_err(|e| Error::io(path, e))?;
    let meta = FrameMeta {
        pixel_size_m: raster.geometry().pixel_size(),
        timestamp_s: raster.timestamp(),
    };
    let meta_path = meta_path.as_ref();
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(meta_path, text).map_err(|e| Error::io(meta_path, e))
}

/// Writes a per-pixel field as `f32le` with a `<path>.json` sidecar.
/// Non-finite values become [`NODATA`].
pub fn write_field(path: impl AsRef<Path>, geometry: &GridGeometry, values: &[f64]) -> Result<()> {
    let path = path.as_ref();
    if values.len() != geometry.len() {
        return Err(Error::Geometry(format!(
            "field has {} values, grid has {}",
            values.len(),
            geometry.len()
        )));
    }
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        let v = if v.is_finite() { v as f32 } else { NODATA };
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))?;

    let meta = FieldMeta {
        width: geometry.width(),
        height: geometry.height(),
        dtype: "f32le".into(),
        nodata: f64::from(NODATA),
    };
    let side = sidecar_path(path);
    let text = serde_json::to_string_pretty(&meta).expect("metadata serializes");
    fs::write(&side, text).map_err(|e| Error::io(&side, e))
}

/// Reads an `f32le` field raster. [`NODATA`] entries come back as `NaN`.
pub fn read_field(path: impl AsRef<Path>) -> Result<(FieldMeta, Vec<f64>)> {
    let path = path.as_ref();
    let side = sidecar_path(path);
    let text = fs::read_to_string(&side).map_err(|e| Error::io(&side, e))?;
    let meta: FieldMeta =
        serde_json::from_str(&text).map_err(|e| Error::Metadata(e.to_string()))?;
    if meta.dtype != "f32le" {
        return Err(Error::Metadata(format!("unsupported dtype {}", meta.dtype)));
    }
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let expected = meta.width * meta.height * 4;
    if bytes.len() != expected {
        return Err(Error::Truncation {
            expected,
            found: bytes.len(),
        });
    }
    let values = bytes
        .chunks_exact(4)
        .map(|c| {
            let v = f32::from_le_bytes([c[0], c[1], c[2], c[3]]);
            if v == meta.nodata as f32 {
                f64::NAN
            } else {
                f64::from(v)
            }
        })
        .collect();
    Ok((meta, values))
}
