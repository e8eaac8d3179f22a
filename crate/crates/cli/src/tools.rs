use std::fs;
use std::io::Write;
use std::path::PathBuf;

use anyhow::Context;
use clap::{Args, ValueEnum};

use seaice_ot::prelude::*;
use seaice_ot::raster::io::save_raster;

use crate::{load_frame, load_pair, resolve_dt};

#[derive(Debug, Args)]
pub struct NccArgs {
    pub source: PathBuf,
    pub target: PathBuf,
    #[arg(long)]
    pub source_meta: Option<PathBuf>,
    #[arg(long)]
    pub target_meta: Option<PathBuf>,
    /// Window side in pixels.
    #[arg(long, default_value_t = 50)]
    pub window: usize,
    /// Largest shift searched per axis; defaults to half a window.
    #[arg(long)]
    pub search_radius: Option<usize>,
    /// Step between windows; defaults to the window side.
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long, default_value_t = seaice_ot::ncc::DEFAULT_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub dt: Option<f64>,
    /// CSV destination; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

fn writer(out: Option<&PathBuf>) -> anyhow::Result<csv::Writer<Box<dyn Write>>> {
    let sink: Box<dyn Write> = match out {
        Some(path) => Box::new(
            fs::File::create(path).with_context(|| format!("creating {}", path.display()))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    Ok(csv::Writer::from_writer(sink))
}

pub fn ncc(args: &NccArgs) -> anyhow::Result<()> {
    let (src, tgt) = load_pair(
        &args.source,
        &args.target,
        args.source_meta.as_ref(),
        args.target_meta.as_ref(),
    )?;
    let dt = resolve_dt(&src, &tgt, args.dt)?;
    let mut params = NccParams::new(args.window);
    params.threshold = args.threshold;
    if let Some(r) = args.search_radius {
        params.search_radius = r;
    }
    if let Some(s) = args.stride {
        params.stride = s;
    }
    let matches = ncc_displacements(&src, &tgt, &params)?;

    let pixel = src.geometry().pixel_size();
    let mut w = writer(args.out.as_ref())?;
    w.write_record([
        "window_center_x",
        "window_center_y",
        "dx_px",
        "dy_px",
        "dx_m_per_s",
        "dy_m_per_s",
        "correlation",
    ])?;
    for m in &matches {
        let (vx, vy) = m.velocity(pixel, dt);
        w.serialize((m.center.0, m.center.1, m.displacement.0, m.displacement.1, vx, vy, m.correlation))?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Translate,
    SplitEqual,
    SplitUnequal,
    SplitQuad,
    MultiFloe,
    Rotate,
}

impl From<KindArg> for ScenarioKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Translate => ScenarioKind::Translate,
            KindArg::SplitEqual => ScenarioKind::SplitEqual,
            KindArg::SplitUnequal => ScenarioKind::SplitUnequal,
            KindArg::SplitQuad => ScenarioKind::SplitQuad,
            KindArg::MultiFloe => ScenarioKind::MultiFloe,
            KindArg::Rotate => ScenarioKind::Rotate,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Polygon,
    Disc,
    Block,
}

#[derive(Debug, Args)]
pub struct ScenarioArgs {
    #[arg(long, value_enum, default_value_t = KindArg::Translate)]
    pub kind: KindArg,
    /// Grid side; lengths scale with it from their 128-pixel defaults.
    #[arg(long, default_value_t = 128)]
    pub size: usize,
    #[arg(long, value_enum, default_value_t = ShapeArg::Polygon)]
    pub shape: ShapeArg,
    /// Floe radius in pixels.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Translation at t = 1, in pixels.
    #[arg(long)]
    pub displacement: Option<f64>,
    /// Rotation at t = 1, in degrees.
    #[arg(long)]
    pub rotation: Option<f64>,
    #[arg(long, default_value_t = 250.0)]
    pub pixel_size: f64,
    /// Seconds between the t = 0 and t = 1 frames.
    #[arg(long, default_value_t = 86_400.0)]
    pub dt: f64,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ScenarioArgs {
    pub fn scenario(&self) -> Scenario {
        let mut s = Scenario::new(self.kind.into()).scaled_to(self.size);
        s.shape = match self.shape {
            ShapeArg::Polygon => FloeShape::Polygon,
            ShapeArg::Disc => FloeShape::Disc,
            ShapeArg::Block => FloeShape::Block { aspect: 1.0 },
        };
        s.pixel_size = self.pixel_size;
        s.dt = self.dt;
        if let Some(r) = self.radius {
            s.radius = r;
        }
        if let Some(d) = self.displacement {
            s.displacement = d;
        }
        if let Some(a) = self.rotation {
            s.rotation = a.to_radians();
        }
        if let Some(seed) = self.seed {
            s.seed = seed;
        }
        s
    }
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Pseudo-time of the target frame.
    #[arg(long, default_value_t = 1.0)]
    pub t: f64,
    /// Output directory; receives source.pgm and target.pgm with sidecars.
    #[arg(long, short)]
    pub out: PathBuf,
}

pub fn synth(args: &SynthArgs) -> anyhow::Result<()> {
    let s = args.scenario.scenario();
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    for (name, t) in [("source.pgm", 0.0), ("target.pgm", args.t)] {
        let frame = render(&s, t)?;
        let path = args.out.join(name);
        save_raster(&frame, &path, seaice_ot::raster::io::sidecar_path(&path))?;
    }
    Ok(())
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma-separated regularization strengths.
    #[arg(long, value_delimiter = ',', default_values_t = [1e-3, 1e-2, 1e-1, 1.0])]
    pub eps: Vec<f64>,
    #[arg(long, default_value_t = 11)]
    pub t_steps: usize,
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long)]
    pub log_domain: bool,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

/// Exit status 2 when any point failed to converge.
pub fn sweep(args: &SweepArgs) -> anyhow::Result<u8> {
    let s = args.scenario.scenario();
    let mut solver = SinkhornOptions {
        tol: args.tol,
        max_iter: args.max_iter,
        ..SinkhornOptions::default()
    };
    if args.log_domain {
        solver = solver.log_domain();
    }
    let options = SweepOptions {
        solver,
        floor: args.floor,
    };
    let points = seaice_ot::synth::sweep(&s, &args.eps, args.t_steps, &options)?;
    let mut w = writer(args.out.as_ref())?;
    w.write_record(["eps", "t", "w_eps_minus_w0", "iterations", "converged"])?;
    for p in &points {
        w.serialize((p.eps, p.t, p.w_eps_minus_w0, p.iterations, p.converged))?;
    }
    w.flush()?;
    Ok(if points.iter().all(|p| p.converged) {
        0
    } else {
        crate::EXIT_NOT_CONVERGED
    })
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    pub source: PathBuf,
    pub target: PathBuf,
    #[arg(long)]
    pub source_meta: Option<PathBuf>,
    #[arg(long)]
    pub target_meta: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    /// JSON destination; standard output when omitted.
    #[arg(long, short)]
    pub out: Option<PathBuf>,
}

pub fn oracle(args: &OracleArgs) -> anyhow::Result<()> {
    let src = load_frame(&args.source, args.source_meta.as_deref())?;
    let tgt = load_frame(&args.target, args.target_meta.as_deref())?;
    anyhow::ensure!(
        src.geometry().same_shape(tgt.geometry()),
        Error::Geometry("source and target differ in shape".into())
    );
    let p = normalize_to_mass(&src, args.floor, None)?;
    let q = normalize_to_mass(&tgt, args.floor, None)?;
    let cost = build_cost(src.geometry())?;
    let plan = exact_wasserstein(p.mass(), q.mass(), &cost)?;
    let text = serde_json::to_string(&plan)? + "\n";
    match &args.out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

