use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::kernel::GibbsKernel;
use super::KernelSpec;
use crate::error::{Error, Result};
use crate::raster::{GridGeometry, MassField};

/// Arithmetic used for the scaling iterations.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stabilization {
    /// Plain multiplicative updates of `u` and `w`.
    #[default]
    Plain,
    /// Updates of `log u`, `log w` through log-sum-exp kernel applications.
    /// Slower, but survives epsilon far below the squared mass separation.
    LogDomain,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SinkhornOptions {
    /// Stop once the ∞-norm change of `u` (of `log u` in the log domain) or
    /// the ∞-norm marginal residual falls below this level. Only the latter
    /// counts as convergence.
    pub tol: f64,
    pub max_iter: usize,
    pub stabilization: Stabilization,
}

impl Default for SinkhornOptions {
    fn default() -> Self {
        Self {
            tol: 1e-6,
            max_iter: 1000,
            stabilization: Stabilization::Plain,
        }
    }
}

impl SinkhornOptions {
    pub fn log_domain(self) -> Self {
        Self {
            stabilization: Stabilization::LogDomain,
            ..self
        }
    }
}

/// Result of a Sinkhorn solve: the scalings `u`, `w` of the optimal coupling
/// `diag(u) ξ diag(w)`, together with solver diagnostics.
///
/// The scalings are held as logarithms so that log-domain solves whose `u`
/// or `w` exceed the `f64` range remain representable. The column marginal of
/// the returned pair is exact to rounding; `residual` is the ∞-norm error of
/// the row marginal.
#[derive(Debug, Clone)]
pub struct ScalingPair {
    log_u: Vec<f64>,
    log_w: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
    /// Row-marginal residual after every iteration.
    pub residual_history: Vec<f64>,
    pub stabilization: Stabilization,
    kernel: Arc<GibbsKernel>,
}

impl ScalingPair {
    pub fn log_u(&self) -> &[f64] {
        &self.log_u
    }

    pub fn log_w(&self) -> &[f64] {
        &self.log_w
    }

    /// `u` in linear scale; may overflow for log-domain solves.
    pub fn u(&self) -> Vec<f64> {
        self.log_u.iter().map(|l| l.exp()).collect()
    }

    pub fn w(&self) -> Vec<f64> {
        self.log_w.iter().map(|l| l.exp()).collect()
    }

    pub fn kernel(&self) -> &GibbsKernel {
        &self.kernel
    }

    pub fn kernel_spec(&self) -> &KernelSpec {
        self.kernel.spec()
    }

    pub fn geometry(&self) -> &GridGeometry {
        self.kernel.geometry()
    }

    pub fn epsilon(&self) -> f64 {
        self.kernel.epsilon()
    }

    /// Whether the recorded residuals never increased from one iteration to
    /// the next.
    pub fn residual_monotone(&self) -> bool {
        self.residual_history.windows(2).all(|w| w[1] <= w[0])
    }

    pub(crate) fn require_converged(&self) -> Result<()> {
        if self.converged {
            Ok(())
        } else {
            Err(Error::Stale {
                iterations: self.iterations,
                residual: self.residual,
            })
        }
    }
}

fn inf_norm_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()))
}

/// Sinkhorn diagonal scaling between `p` and `q`, starting from `u = 1`.
///
/// Each iteration performs `u ← p ⊘ ξw` then `w ← q ⊘ ξᵀu`. In plain
/// arithmetic, a scaling that overflows or underflows aborts with
/// [`Error::Stabilization`]. Hitting `max_iter` is not an error; the returned
/// pair then has `converged == false`.
pub fn sinkhorn(
    p: &MassField,
    q: &MassField,
    kernel: &Arc<GibbsKernel>,
    options: &SinkhornOptions,
) -> Result<ScalingPair> {
    let g = kernel.geometry();
    if !p.geometry().same_shape(g) || !q.geometry().same_shape(g) {
        return Err(Error::Geometry(format!(
            "mass fields {}x{} and {}x{} on a {}x{} kernel",
            p.geometry().width(),
            p.geometry().height(),
            q.geometry().width(),
            q.geometry().height(),
            g.width(),
            g.height()
        )));
    }
    if !(options.tol > 0.0) || options.max_iter == 0 {
        return Err(Error::Parameter("tol must be positive and max_iter nonzero".into()));
    }
    let source_total: f64 = p.mass().iter().sum();
    let target_total: f64 = q.mass().iter().sum();
    if (source_total - target_total).abs() > 1e-9 {
        return Err(Error::Balance {
            source_total,
            target_total,
        });
    }
    match options.stabilization {
        Stabilization::Plain => plain(p.mass(), q.mass(), kernel, options),
        Stabilization::LogDomain => log_domain(p.mass(), q.mass(), kernel, options),
    }
}

fn plain(p: &[f64], q: &[f64], kernel: &Arc<GibbsKernel>, opts: &SinkhornOptions) -> Result<ScalingPair> {
    let ratio = |num: &[f64], den: &[f64], vector, iteration| -> Result<Vec<f64>> {
        let out: Vec<f64> = num.iter().zip(den).map(|(n, d)| n / d).collect();
        if out.iter().all(|v| v.is_finite() && *v > 0.0) {
            Ok(out)
        } else {
            Err(Error::Stabilization { vector, iteration })
        }
    };

    let mut u = vec![1.0; p.len()];
    let mut w = ratio(q, &kernel.apply(&u), "w", 0)?;
    let mut kw = kernel.apply(&w);
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let next = ratio(p, &kw, "u", iterations)?;
        let change = inf_norm_diff(&next, &u);
        u = next;
        w = ratio(q, &kernel.apply(&u), "w", iterations)?;
        kw = kernel.apply(&w);
        residual = u
            .iter()
            .zip(&kw)
            .zip(p)
            .fold(0.0f64, |m, ((u, k), p)| m.max((u * k - p).abs()));
        history.push(residual);
        if change < opts.tol || residual <= opts.tol {
            converged = residual <= opts.tol;
            break;
        }
    }

    Ok(ScalingPair {
        log_u: u.iter().map(|v| v.ln()).collect(),
        log_w: w.iter().map(|v| v.ln()).collect(),
        iterations,
        residual,
        converged,
        residual_history: history,
        stabilization: Stabilization::Plain,
        kernel: Arc::clone(kernel),
    })
}

fn log_domain(
    p: &[f64],
    q: &[f64],
    kernel: &Arc<GibbsKernel>,
    opts: &SinkhornOptions,
) -> Result<ScalingPair> {
    let log_p: Vec<f64> = p.iter().map(|v| v.ln()).collect();
    let log_q: Vec<f64> = q.iter().map(|v| v.ln()).collect();
    let update = |log_m: &[f64], lk: Vec<f64>, vector, iteration| -> Result<Vec<f64>> {
        let out: Vec<f64> = log_m.iter().zip(&lk).map(|(m, k)| m - k).collect();
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::Stabilization { vector, iteration })
        }
    };

    let mut lu = vec![0.0; p.len()];
    let mut lw = update(&log_q, kernel.apply_log(&lu), "w", 0)?;
    let mut lkw = kernel.apply_log(&lw);
    let mut history = Vec::new();
    let mut residual = f64::INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        iterations += 1;
        let next = update(&log_p, lkw, "u", iterations)?;
        let change = inf_norm_diff(&next, &lu);
        lu = next;
        lw = update(&log_q, kernel.apply_log(&lu), "w", iterations)?;
        lkw = kernel.apply_log(&lw);
        residual = lu
            .iter()
            .zip(&lkw)
            .zip(p)
            .fold(0.0f64, |m, ((u, k), p)| m.max(((u + k).exp() - p).abs()));
        history.push(residual);
        if change < opts.tol || residual <= opts.tol {
            converged = residual <= opts.tol;
            break;
        }
    }

    Ok(ScalingPair {
        log_u: lu,
        log_w: lw,
        iterations,
        residual,
        converged,
        residual_history: history,
        stabilization: Stabilization::LogDomain,
        kernel: Arc::clone(kernel),
    })
}
