use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

use seaice_ot::raster::io::read_field;

use crate::solve::Summary;

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Output directory of `solve`.
    #[arg(long)]
    pub bundle: PathBuf,
    /// CSV with columns src_x, src_y, tgt_x, tgt_y in pixel coordinates.
    #[arg(long)]
    pub features: PathBuf,
    /// Output of `ncc` to score alongside the transport solution.
    #[arg(long)]
    pub ncc: Option<PathBuf>,
    /// JSON report destination; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct Feature {
    src_x: f64,
    src_y: f64,
    tgt_x: f64,
    tgt_y: f64,
}

#[derive(Debug, Deserialize)]
struct NccRow {
    window_center_x: f64,
    window_center_y: f64,
    dx_px: f64,
    dy_px: f64,
}

#[derive(Debug, Serialize)]
pub struct FeatureError {
    pub src_x: f64,
    pub src_y: f64,
    pub manual_dx_m: f64,
    pub manual_dy_m: f64,
    /// Predicted displacement; absent at nodata pixels.
    pub predicted_dx_m: Option<f64>,
    pub predicted_dy_m: Option<f64>,
    pub abs_error_m: Option<f64>,
    pub nodata: bool,
}

#[derive(Debug, Serialize)]
pub struct Scored {
    pub count: usize,
    /// Features that entered the median.
    pub used: usize,
    pub nodata: usize,
    /// `null` when no feature could be scored.
    pub median_abs_error_m: Option<f64>,
    pub features: Vec<FeatureError>,
}

#[derive(Debug, Serialize)]
pub struct Report {
    pub ot: Scored,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ncc: Option<Scored>,
}

fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    })
}

/// Scores each feature against `predict`, which returns a displacement in
/// meters or `None` for nodata.
fn score(features: &[Feature], pixel: f64, predict: impl Fn(&Feature) -> Option<(f64, f64)>) -> Scored {
    let rows: Vec<FeatureError> = features
        .iter()
        .map(|f| {
            let manual = ((f.tgt_x - f.src_x) * pixel, (f.tgt_y - f.src_y) * pixel);
            let predicted = predict(f);
            FeatureError {
                src_x: f.src_x,
                src_y: f.src_y,
                manual_dx_m: manual.0,
                manual_dy_m: manual.1,
                predicted_dx_m: predicted.map(|p| p.0),
                predicted_dy_m: predicted.map(|p| p.1),
                abs_error_m: predicted.map(|p| (p.0 - manual.0).hypot(p.1 - manual.1)),
                nodata: predicted.is_none(),
            }
        })
        .collect();
    let errors: Vec<f64> = rows.iter().filter_map(|r| r.abs_error_m).collect();
    Scored {
        count: rows.len(),
        used: errors.len(),
        nodata: rows.len() - errors.len(),
        median_abs_error_m: median(errors),
        features: rows,
    }
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> anyhow::Result<Vec<T>> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    reader
        .deserialize()
        .collect::<Result<Vec<T>, _>>()
        .with_context(|| format!("parsing {}", path.display()))
}

pub fn compare(args: &CompareArgs) -> anyhow::Result<Report> {
    let summary_path = args.bundle.join("summary.json");
    let summary: Summary = serde_json::from_str(
        &fs::read_to_string(&summary_path).with_context(|| format!("reading {}", summary_path.display()))?,
    )
    .with_context(|| format!("parsing {}", summary_path.display()))?;
    let (meta, vx) = read_field(args.bundle.join("vx.f32"))?;
    let (_, vy) = read_field(args.bundle.join("vy.f32"))?;
    anyhow::ensure!(
        (meta.width, meta.height) == (summary.width, summary.height),
        "velocity rasters are {}x{} but the summary says {}x{}",
        meta.width,
        meta.height,
        summary.width,
        summary.height
    );

    let features: Vec<Feature> = read_csv(&args.features)?;
    let (w, h) = (meta.width as f64, meta.height as f64);
    for (k, f) in features.iter().enumerate() {
        let inside = |x: f64, y: f64| (0.0..w).contains(&x.round()) && (0.0..h).contains(&y.round());
        anyhow::ensure!(
            inside(f.src_x, f.src_y),
            "feature {k}: source pixel ({}, {}) lies outside the {}x{} grid",
            f.src_x,
            f.src_y,
            meta.width,
            meta.height
        );
    }

    let pixel = summary.pixel_size_m;
    let ot = score(&features, pixel, |f| {
        let i = f.src_y.round() as usize * meta.width + f.src_x.round() as usize;
        let (x, y) = (vx[i], vy[i]);
        (x.is_finite() && y.is_finite()).then_some((x * summary.dt_s, y * summary.dt_s))
    });

    let ncc = match &args.ncc {
        None => None,
        Some(path) => {
            let windows: Vec<NccRow> = read_csv(path)?;
            Some(score(&features, pixel, |f| {
                windows
                    .iter()
                    .min_by(|a, b| {
                        let d = |r: &NccRow| (r.window_center_x - f.src_x).hypot(r.window_center_y - f.src_y);
                        d(a).total_cmp(&d(b))
                    })
                    .map(|r| (r.dx_px * pixel, r.dy_px * pixel))
            }))
        }
    };
    Ok(Report { ot, ncc })
}

pub fn run(args: &CompareArgs) -> anyhow::Result<()> {
    let report = compare(args)?;
    let text = serde_json::to_string_pretty(&report)? + "\n";
    match &args.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => print!("{text}"),
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn median_of_even_and_empty() {
        assert_eq!(median(vec![]), None);
        assert_eq!(median(vec![3.0, 1.0]), Some(2.0));
        assert_eq!(median(vec![5.0, 1.0, 2.0]), Some(2.0));
    }

    #[test]
    fn exact_prediction_scores_zero() {
        let f = Feature {
            src_x: 3.0,
            src_y: 4.0,
            tgt_x: 5.0,
            tgt_y: 4.0,
        };
        let s = score(&[f], 250.0, |_| Some((500.0, 0.0)));
        assert_eq!(s.median_abs_error_m, Some(0.0));
        let s = score(&[f], 250.0, |_| None);
        assert_eq!((s.used, s.nodata, s.median_abs_error_m), (0, 1, None));
    }
}
