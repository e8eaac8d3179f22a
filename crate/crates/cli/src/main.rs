use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand, ValueEnum};
use seaice_ot::prelude::*;
use seaice_ot::raster::io::{load_raster, sidecar_path};

mod features;
mod solve;
mod tools;

/// Exit status when the solver hit `max_iter`; outputs are still written.
pub const EXIT_NOT_CONVERGED: u8 = 2;
/// Exit status when plain scaling left the floating-point range.
pub const EXIT_UNSTABLE: u8 = 3;

#[derive(Parser)]
#[command(name = "seaice-ot", version, about = "Sea-ice deformation from image pairs via entropic optimal transport")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve for transport between two frames and export distance, velocity and strain fields.
    Solve(solve::SolveArgs),
    /// Windowed normalized cross-correlation displacements.
    Ncc(tools::NccArgs),
    /// Render a synthetic floe scenario as a source/target frame pair.
    Synth(tools::SynthArgs),
    /// Regularized distance against pseudo-time for several epsilons.
    Sweep(tools::SweepArgs),
    /// Exact transport cost between two tiny frames.
    Oracle(tools::OracleArgs),
    /// Compare a solved bundle (and optionally NCC output) with hand-marked features.
    CompareFeatures(features::CompareArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    /// Dense for grids up to 4096 pixels, convolutional above.
    Auto,
    Dense,
    Conv,
}

/// Solver and preprocessing settings.
#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Regularization strength, in squared normalized length.
    #[arg(long, default_value_t = 1e-3)]
    pub eps: f64,
    /// Marginal residual at which the solve counts as converged.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    #[arg(long, default_value_t = 1000)]
    pub max_iter: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    /// Scaling in log space; needed when epsilon is tiny relative to the distances travelled.
    #[arg(long)]
    pub log_domain: bool,
    /// Source pixels brighter than this are ice.
    #[arg(long, default_value_t = DEFAULT_ICE_THRESHOLD)]
    pub mask_threshold: f64,
    /// Background added before normalization, relative to total intensity.
    #[arg(long, default_value_t = DEFAULT_FLOOR)]
    pub floor: f64,
    /// Contrast-limited adaptive histogram equalization of the ice pixels.
    #[arg(long)]
    pub equalize: bool,
    /// Equalization block side, in pixels.
    #[arg(long, default_value_t = 8)]
    pub tile: usize,
    /// Equalization clip limit, relative to a flat histogram.
    #[arg(long, default_value_t = 2.0)]
    pub clip: f64,
}

impl RunConfig {
    pub fn kernel_spec(&self, geometry: &GridGeometry) -> KernelSpec {
        match self.mode {
            ModeArg::Auto => KernelSpec::auto(self.eps, geometry),
            ModeArg::Dense => KernelSpec::dense(self.eps),
            ModeArg::Conv => KernelSpec::convolutional(self.eps, geometry),
        }
    }

    pub fn solver(&self) -> SinkhornOptions {
        let opts = SinkhornOptions {
            tol: self.tol,
            max_iter: self.max_iter,
            ..SinkhornOptions::default()
        };
        if self.log_domain {
            opts.log_domain()
        } else {
            opts
        }
    }
}

/// A PGM frame and its sidecar, defaulting to `<frame>.json`.
pub fn load_frame(path: &Path, meta: Option<&Path>) -> anyhow::Result<IntensityRaster> {
    let meta = meta.map(Path::to_path_buf).unwrap_or_else(|| sidecar_path(path));
    load_raster(path, &meta).with_context(|| format!("loading {}", path.display()))
}

/// Frame pair with matching shapes; the error maps to exit status 1.
pub fn load_pair(
    source: &Path,
    target: &Path,
    source_meta: Option<&PathBuf>,
    target_meta: Option<&PathBuf>,
) -> anyhow::Result<(IntensityRaster, IntensityRaster)> {
    let src = load_frame(source, source_meta.map(PathBuf::as_path))?;
    let tgt = load_frame(target, target_meta.map(PathBuf::as_path))?;
    let (a, b) = (src.geometry(), tgt.geometry());
    if !a.same_shape(b) {
        anyhow::bail!(Error::Geometry(format!(
            "source is {}x{}, target is {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    Ok((src, tgt))
}

/// Frame interval: the override when given, else the sidecar timestamps.
pub fn resolve_dt(src: &IntensityRaster, tgt: &IntensityRaster, over: Option<f64>) -> anyhow::Result<f64> {
    let dt = over.unwrap_or(tgt.timestamp() - src.timestamp());
    if !(dt.is_finite() && dt > 0.0) {
        anyhow::bail!(Error::Parameter(format!(
            "time step {dt} s is not positive; check the sidecar timestamps or pass --dt"
        )));
    }
    Ok(dt)
}

fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::Stabilization { .. }) => EXIT_UNSTABLE,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Solve(args) => solve::run(&args),
        Command::Ncc(args) => tools::ncc(&args).map(|()| 0),
        Command::Synth(args) => tools::synth(&args).map(|()| 0),
        Command::Sweep(args) => tools::sweep(&args),
        Command::Oracle(args) => tools::oracle(&args).map(|()| 0),
        Command::CompareFeatures(args) => features::run(&args).map(|()| 0),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
