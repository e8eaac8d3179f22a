use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

use seaice_ot::prelude::*;
use seaice_ot::raster::io::write_field;

use crate::{load_pair, resolve_dt, RunConfig, EXIT_NOT_CONVERGED};

#[derive(Debug, Args)]
pub struct SolveArgs {
    pub source: PathBuf,
    pub target: PathBuf,
    /// Source sidecar; defaults to `<source>.json`.
    #[arg(long)]
    pub source_meta: Option<PathBuf>,
    #[arg(long)]
    pub target_meta: Option<PathBuf>,
    /// Output directory, created if missing.
    #[arg(long, short)]
    pub out: PathBuf,
    /// Seconds between the frames; overrides the sidecar timestamps.
    #[arg(long)]
    pub dt: Option<f64>,
    /// Clip the principal strain to `[-bound, bound]`.
    #[arg(long)]
    pub clip_strain: Option<f64>,
    /// Also write vectors.csv with every k-th valid pixel along each axis.
    #[arg(long)]
    pub thin: Option<usize>,
    /// Subtract the displacement of the source transported onto itself,
    /// removing the blur bias near floe edges. Costs a second solve.
    #[arg(long)]
    pub debias: bool,
    #[command(flatten)]
    pub config: RunConfig,
}

/// Contents of `summary.json`.
#[derive(Debug, Serialize, Deserialize)]
pub struct Summary {
    pub w_eps: f64,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    pub eps: f64,
    pub mode: String,
    pub stabilization: Stabilization,
    pub width: usize,
    pub height: usize,
    pub pixel_size_m: f64,
    pub dt_s: f64,
    #[serde(default)]
    pub debiased: bool,
}

pub fn run(args: &SolveArgs) -> anyhow::Result<u8> {
    let cfg = &args.config;
    let (src, tgt) = load_pair(
        &args.source,
        &args.target,
        args.source_meta.as_ref(),
        args.target_meta.as_ref(),
    )?;
    let dt = resolve_dt(&src, &tgt, args.dt)?;
    let g = *src.geometry();

    let mask = apply_ice_mask(&src, cfg.mask_threshold);
    let (src, tgt) = if cfg.equalize {
        let tgt_mask = apply_ice_mask(&tgt, cfg.mask_threshold);
        (
            equalize_contrast(&src, cfg.tile, cfg.clip, Some(&mask))?,
            equalize_contrast(&tgt, cfg.tile, cfg.clip, Some(&tgt_mask))?,
        )
    } else {
        (src, tgt)
    };
    let p = normalize_to_mass(&src, cfg.floor, Some(&mask))?;
    let q = normalize_to_mass(&tgt, cfg.floor, None)?;

    let spec = cfg.kernel_spec(&g);
    let kernel = GibbsKernel::new(spec, g)?;
    let pair = sinkhorn(&p, &q, &kernel, &cfg.solver())?;

    let summary = transport_distance(&p, &q, &pair)?;
    let mut map = barycentric_map(&p, &pair)?;
    if args.debias {
        let own = sinkhorn(&p, &p, &kernel, &cfg.solver())?;
        map = map.debiased(&barycentric_map(&p, &own)?, &g)?;
    }
    let v = velocity(&map, &g, dt)?;
    let s = strain(&v, &g, dt)?;
    let principal = principal_strain(&s, args.clip_strain);

    let out = &args.out;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let fields: [(&str, &[f64]); 8] = [
        ("cbar.f32", &summary.cbar),
        ("cbar_ms.f32", &summary.speed(&g, dt)),
        ("vx.f32", &v.vx),
        ("vy.f32", &v.vy),
        ("exx.f32", &s.exx),
        ("eyy.f32", &s.eyy),
        ("exy.f32", &s.exy),
        ("principal.f32", &principal),
    ];
    for (name, values) in fields {
        write_field(out.join(name), &g, values)?;
    }
    if let Some(k) = args.thin {
        write_vectors(&out.join("vectors.csv"), &g, &v, k)?;
    }

    let report = Summary {
        w_eps: summary.w_eps,
        iterations: pair.iterations,
        residual: pair.residual,
        converged: pair.converged,
        eps: cfg.eps,
        mode: if spec.is_dense() { "dense" } else { "conv" }.into(),
        stabilization: pair.stabilization,
        width: g.width(),
        height: g.height(),
        pixel_size_m: g.pixel_size(),
        dt_s: dt,
        debiased: args.debias,
    };
    let text = serde_json::to_string_pretty(&report)?;
    fs::write(out.join("summary.json"), text + "\n")?;

    if pair.converged {
        Ok(0)
    } else {
        eprintln!(
            "warning: no convergence after {} iterations (residual {:e}); outputs written",
            pair.iterations, pair.residual
        );
        Ok(EXIT_NOT_CONVERGED)
    }
}

fn write_vectors(path: &Path, g: &GridGeometry, v: &VelocityField, k: usize) -> anyhow::Result<()> {
    anyhow::ensure!(k > 0, "--thin must be positive");
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["x", "y", "vx_m_per_s", "vy_m_per_s"])?;
    for row in (0..g.height()).step_by(k) {
        for col in (0..g.width()).step_by(k) {
            let i = g.index(col, row);
            if v.vx[i].is_finite() && v.vy[i].is_finite() {
                w.serialize((col, row, v.vx[i], v.vy[i]))?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
