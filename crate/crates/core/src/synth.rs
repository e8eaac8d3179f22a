//! Synthetic floe scenarios parameterized by a pseudo-time `t ∈ [0, 1]`, and
//! regularized-distance sweeps over them.
//!
//! Frames are binary: floe pixels have intensity 255, background 0. A frame
//! is rasterized by mapping each pixel center back to its `t = 0` position
//! and testing it against the fragment that moved there, so translations by
//! whole pixels reproduce the source pixel set exactly.

use std::f64::consts::TAU;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::otcore::{sinkhorn, wasserstein_value_unchecked, GibbsKernel, KernelSpec, SinkhornOptions};
use crate::raster::{normalize_to_mass, GridGeometry, IntensityRaster, DEFAULT_FLOOR};

pub const FLOE_INTENSITY: f64 = 255.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    /// One floe translating horizontally.
    Translate,
    /// One floe splitting into halves that drift apart while translating.
    SplitEqual,
    /// As `SplitEqual` with a 20% / 80% split.
    SplitUnequal,
    /// One floe splitting into four pieces that spread out around the
    /// original center of mass.
    SplitQuad,
    /// Two floes translating by different amounts in different directions.
    MultiFloe,
    /// One floe rotating about its center.
    Rotate,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 6] = [
        ScenarioKind::Translate,
        ScenarioKind::SplitEqual,
        ScenarioKind::SplitUnequal,
        ScenarioKind::SplitQuad,
        ScenarioKind::MultiFloe,
        ScenarioKind::Rotate,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FloeShape {
    /// Irregular convex polygon drawn from the scenario seed.
    Polygon,
    Disc,
    /// Axis-aligned rectangle with the given half-width over radius ratio.
    Block { aspect: f64 },
}

/// A synthetic scenario. Lengths are in pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub kind: ScenarioKind,
    /// Side of the square grid.
    pub size: usize,
    pub pixel_size: f64,
    /// Seconds between the `t = 0` and `t = 1` frames.
    pub dt: f64,
    pub shape: FloeShape,
    /// Floe radius.
    pub radius: f64,
    /// Bulk translation reached at `t = 1`.
    pub displacement: f64,
    /// Separation between fragments reached at `t = 1`.
    pub gap: f64,
    /// Rotation angle at `t = 1`, radians.
    pub rotation: f64,
    /// Fraction of the floe in the left fragment of a two-way split.
    pub split_fraction: f64,
    pub seed: u64,
}

impl Scenario {
    /// Defaults: 128×128 grid of 250 m pixels one day apart, polygonal floe
    /// of radius 24 moving 20 pixels.
    pub fn new(kind: ScenarioKind) -> Self {
        Self {
            kind,
            size: 128,
            pixel_size: 250.0,
            dt: 86_400.0,
            shape: FloeShape::Polygon,
            radius: 24.0,
            displacement: 20.0,
            gap: 12.0,
            rotation: 60f64.to_radians(),
            split_fraction: match kind {
                ScenarioKind::SplitUnequal => 0.2,
                _ => 0.5,
            },
            seed: 7,
        }
    }

    /// Scales every length to a grid of `size` pixels per side.
    pub fn scaled_to(mut self, size: usize) -> Self {
        let f = size as f64 / self.size as f64;
        self.size = size;
        self.radius *= f;
        self.displacement *= f;
        self.gap *= f;
        self
    }

    pub fn geometry(&self) -> Result<GridGeometry> {
        GridGeometry::new(self.size, self.size, self.pixel_size)
    }

    fn fragments(&self) -> Vec<Fragment> {
        let n = self.size as f64;
        let d = self.displacement;
        let base_center = (0.5 * n - 0.5 * d, 0.5 * n);
        let floe = |center, radius, seed| Region::new(self.shape, center, radius, seed);
        let moving = |region, dx, dy| Fragment {
            region,
            motion: Motion::Translate(dx, dy),
        };

        match self.kind {
            ScenarioKind::Translate => {
                vec![moving(floe(base_center, self.radius, self.seed), d, 0.0)]
            }
            ScenarioKind::SplitEqual | ScenarioKind::SplitUnequal => {
                let whole = floe(base_center, self.radius, self.seed);
                let xs = whole.split_abscissa(self.split_fraction);
                let g = 0.5 * self.gap;
                vec![
                    moving(whole.clip(HalfPlane::x_at_most(xs)), d - g, 0.0),
                    moving(whole.clip(HalfPlane::x_at_most(xs).flip()), d + g, 0.0),
                ]
            }
            ScenarioKind::SplitQuad => {
                let center = (0.5 * n, 0.5 * n);
                let whole = floe(center, self.radius, self.seed);
                let (cx, cy) = whole.pixel_centroid(self.size);
                let vertical = HalfPlane::x_at_most(cx);
                let horizontal = HalfPlane::y_at_most(cy);
                let pieces: Vec<Region> = [
                    (vertical, horizontal),
                    (vertical.flip(), horizontal),
                    (vertical, horizontal.flip()),
                    (vertical.flip(), horizontal.flip()),
                ]
                .into_iter()
                .map(|(a, b)| whole.clip(a).clip(b))
                .collect();
                // Moving each piece along its offset from the common centroid,
                // with one shared scale, keeps the centroid in place.
                let offsets: Vec<(f64, f64)> = pieces
                    .iter()
                    .map(|r| {
                        let (px, py) = r.pixel_centroid(self.size);
                        (px - cx, py - cy)
                    })
                    .collect();
                let mean_len =
                    offsets.iter().map(|(x, y)| x.hypot(*y)).sum::<f64>() / offsets.len() as f64;
                let s = self.gap / mean_len.max(1e-9);
                pieces
                    .into_iter()
                    .zip(offsets)
                    .map(|(r, (ox, oy))| moving(r, s * ox, s * oy))
                    .collect()
            }
            ScenarioKind::MultiFloe => {
                let r = 0.7 * self.radius;
                vec![
                    moving(floe((0.3 * n, 0.35 * n), r, self.seed), d, 0.0),
                    moving(
                        floe((0.65 * n, 0.7 * n), r, self.seed.wrapping_add(1)),
                        -0.5 * d,
                        -0.5 * d,
                    ),
                ]
            }
            ScenarioKind::Rotate => {
                let center = (0.5 * n, 0.5 * n);
                vec![Fragment {
                    region: floe(center, self.radius, self.seed),
                    motion: Motion::Rotate {
                        center,
                        angle: self.rotation,
                    },
                }]
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct HalfPlane {
    /// Points with `a·x + b·y ≤ c` are inside.
    a: f64,
    b: f64,
    c: f64,
}

impl HalfPlane {
    fn x_at_most(x: f64) -> Self {
        Self { a: 1.0, b: 0.0, c: x }
    }

    fn y_at_most(y: f64) -> Self {
        Self { a: 0.0, b: 1.0, c: y }
    }

    /// Complement (up to the boundary line).
    fn flip(self) -> Self {
        Self {
            a: -self.a,
            b: -self.b,
            c: -self.c,
        }
    }

    fn contains(&self, (x, y): (f64, f64)) -> bool {
        self.a * x + self.b * y <= self.c
    }
}

#[derive(Debug, Clone)]
enum Base {
    Convex(Vec<(f64, f64)>),
    Disc { center: (f64, f64), radius: f64 },
}

#[derive(Debug, Clone)]
struct Region {
    base: Base,
    cuts: Vec<HalfPlane>,
}

impl Region {
    fn new(shape: FloeShape, center: (f64, f64), radius: f64, seed: u64) -> Self {
        let (cx, cy) = center;
        let base = match shape {
            FloeShape::Disc => Base::Disc { center, radius },
            FloeShape::Block { aspect } => {
                let (hw, hh) = (radius * aspect, radius);
                Base::Convex(vec![
                    (cx - hw, cy - hh),
                    (cx + hw, cy - hh),
                    (cx + hw, cy + hh),
                    (cx - hw, cy + hh),
                ])
            }
            FloeShape::Polygon => {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let k = 11;
                let points: Vec<(f64, f64)> = (0..k)
                    .map(|i| {
                        let jitter = rng.gen_range(-0.3..0.3);
                        let angle = TAU * (i as f64 + jitter) / k as f64;
                        let r = radius * rng.gen_range(0.75..1.0);
                        (cx + r * angle.cos(), cy + r * angle.sin())
                    })
                    .collect();
                Base::Convex(convex_hull(points))
            }
        };
        Self {
            base,
            cuts: Vec::new(),
        }
    }

    fn clip(&self, plane: HalfPlane) -> Self {
        let mut out = self.clone();
        out.cuts.push(plane);
        out
    }

    fn contains(&self, p: (f64, f64)) -> bool {
        let inside = match &self.base {
            Base::Disc { center, radius } => {
                (p.0 - center.0).hypot(p.1 - center.1) <= *radius
            }
            Base::Convex(hull) => hull.iter().zip(hull.iter().cycle().skip(1)).all(|(a, b)| {
                (b.0 - a.0) * (p.1 - a.1) - (b.1 - a.1) * (p.0 - a.0) >= 0.0
            }),
        };
        inside && self.cuts.iter().all(|c| c.contains(p))
    }

    /// Pixel centers of the region on a `size`×`size` grid.
    fn pixels(&self, size: usize) -> Vec<(f64, f64)> {
        (0..size)
            .flat_map(|r| (0..size).map(move |c| (c as f64 + 0.5, r as f64 + 0.5)))
            .filter(|&p| self.contains(p))
            .collect()
    }

    fn pixel_centroid(&self, size: usize) -> (f64, f64) {
        let px = self.pixels(size);
        let n = px.len().max(1) as f64;
        (
            px.iter().map(|p| p.0).sum::<f64>() / n,
            px.iter().map(|p| p.1).sum::<f64>() / n,
        )
    }

    /// Vertical line leaving roughly `fraction` of the rasterized floe on its
    /// left.
    fn split_abscissa(&self, fraction: f64) -> f64 {
        let size = self.extent_hint();
        let mut xs: Vec<f64> = self.pixels(size).iter().map(|p| p.0).collect();
        xs.sort_by(f64::total_cmp);
        if xs.is_empty() {
            return 0.0;
        }
        let k = ((fraction * xs.len() as f64).round() as usize).clamp(1, xs.len()) - 1;
        xs[k]
    }

    fn extent_hint(&self) -> usize {
        let far = match &self.base {
            Base::Disc { center, radius } => center.0.max(center.1) + radius,
            Base::Convex(hull) => hull.iter().map(|p| p.0.max(p.1)).fold(0.0, f64::max),
        };
        far.ceil().max(1.0) as usize + 1
    }
}

/// Andrew's monotone chain; counter-clockwise in a y-down frame means the
/// interior lies to the left of each edge under the test in `contains`.
fn convex_hull(mut points: Vec<(f64, f64)>) -> Vec<(f64, f64)> {
    points.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    let cross = |o: (f64, f64), a: (f64, f64), b: (f64, f64)| {
        (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
    };
    let mut lower: Vec<(f64, f64)> = Vec::new();
    for &p in &points {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<(f64, f64)> = Vec::new();
    for &p in points.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

#[derive(Debug, Clone, Copy)]
enum Motion {
    /// Displacement reached at `t = 1`.
    Translate(f64, f64),
    Rotate { center: (f64, f64), angle: f64 },
}

impl Motion {
    /// Where the point now at `p` was at `t = 0`.
    fn origin(&self, p: (f64, f64), t: f64) -> (f64, f64) {
        match *self {
            Motion::Translate(dx, dy) => (p.0 - dx * t, p.1 - dy * t),
            Motion::Rotate { center, angle } => {
                let (s, c) = (-angle * t).sin_cos();
                let (x, y) = (p.0 - center.0, p.1 - center.1);
                (center.0 + c * x - s * y, center.1 + s * x + c * y)
            }
        }
    }
}

#[derive(Debug, Clone)]
struct Fragment {
    region: Region,
    motion: Motion,
}

/// Rasterizes the scenario at pseudo-time `t`. The timestamp of the frame is
/// `t · dt`.
pub fn render(scenario: &Scenario, t: f64) -> Result<IntensityRaster> {
    if !(0.0..=1.0).contains(&t) {
        return Err(Error::Parameter(format!("pseudo-time {t} outside [0, 1]")));
    }
    let geometry = scenario.geometry()?;
    let fragments = scenario.fragments();
    let n = scenario.size;
    let values = (0..n)
        .flat_map(|r| (0..n).map(move |c| (c as f64 + 0.5, r as f64 + 0.5)))
        .map(|p| {
            let hit = fragments
                .iter()
                .any(|f| f.region.contains(f.motion.origin(p, t)));
            if hit {
                FLOE_INTENSITY
            } else {
                0.0
            }
        })
        .collect();
    IntensityRaster::new(geometry, values, t * scenario.dt)
}

/// Solver configuration for [`sweep`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepOptions {
    pub solver: SinkhornOptions,
    pub floor: f64,
}

impl Default for SweepOptions {
    fn default() -> Self {
        Self {
            solver: SinkhornOptions::default(),
            floor: DEFAULT_FLOOR,
        }
    }
}

/// One point of a sweep curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepPoint {
    pub eps: f64,
    pub t: f64,
    /// `W_ε(render(0), render(t)) − W_ε(render(0), render(0))`.
    pub w_eps_minus_w0: f64,
    pub w_eps: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// `W_ε(render(0), render(t))` on `t_steps` uniform samples of `[0, 1]` for
/// every `ε`, each curve shifted so that it starts at zero. Points are ordered
/// by `ε` (as given) then `t`.
pub fn sweep(
    scenario: &Scenario,
    eps_list: &[f64],
    t_steps: usize,
    options: &SweepOptions,
) -> Result<Vec<SweepPoint>> {
    if t_steps < 2 {
        return Err(Error::Parameter("a sweep needs at least two time steps".into()));
    }
    if let Some(e) = eps_list.iter().find(|e| !(e.is_finite() && **e > 0.0)) {
        return Err(Error::Parameter(format!("epsilon must be positive, got {e}")));
    }
    let geometry = scenario.geometry()?;
    let ts: Vec<f64> = (0..t_steps).map(|k| k as f64 / (t_steps - 1) as f64).collect();
    let masses = ts
        .iter()
        .map(|&t| normalize_to_mass(&render(scenario, t)?, options.floor, None))
        .collect::<Result<Vec<_>>>()?;
    let kernels = eps_list
        .iter()
        .map(|&eps| GibbsKernel::new(KernelSpec::auto(eps, &geometry), geometry))
        .collect::<Result<Vec<Arc<GibbsKernel>>>>()?;

    let jobs: Vec<(usize, usize)> = (0..eps_list.len())
        .flat_map(|e| (0..t_steps).map(move |k| (e, k)))
        .collect();
    let raw = jobs
        .par_iter()
        .map(|&(e, k)| {
            let annotate = |source: Error| Error::Sweep {
                eps: eps_list[e],
                t: ts[k],
                source: Box::new(source),
            };
            let pair = sinkhorn(&masses[0], &masses[k], &kernels[e], &options.solver)
                .map_err(annotate)?;
            let w = wasserstein_value_unchecked(&masses[0], &masses[k], &pair).map_err(annotate)?;
            Ok((w, pair.iterations, pair.converged))
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(jobs
        .iter()
        .zip(&raw)
        .map(|(&(e, k), &(w, iterations, converged))| SweepPoint {
            eps: eps_list[e],
            t: ts[k],
            w_eps_minus_w0: w - raw[e * t_steps].0,
            w_eps: w,
            iterations,
            converged,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn floe_pixels(r: &IntensityRaster) -> Vec<usize> {
        r.values()
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0.0)
            .map(|(i, _)| i)
            .collect()
    }

    fn centroid(r: &IntensityRaster) -> (f64, f64) {
        let g = r.geometry();
        let px = floe_pixels(r);
        let n = px.len() as f64;
        let sx: f64 = px.iter().map(|&i| (i % g.width()) as f64).sum();
        let sy: f64 = px.iter().map(|&i| (i / g.width()) as f64).sum();
        (sx / n, sy / n)
    }

    #[test]
    fn t_zero_frames_match_across_kinds_of_floe() {
        for kind in [ScenarioKind::Translate, ScenarioKind::SplitEqual, ScenarioKind::SplitUnequal] {
            let a = render(&Scenario::new(kind), 0.0).unwrap();
            let b = render(&Scenario::new(ScenarioKind::Translate), 0.0).unwrap();
            assert_eq!(a, b, "{kind:?}");
        }
    }

    #[test]
    fn frames_are_binary_and_deterministic() {
        for kind in ScenarioKind::ALL {
            let s = Scenario::new(kind);
            for t in [0.0, 0.35, 1.0] {
                let a = render(&s, t).unwrap();
                assert!(a.values().iter().all(|&v| v == 0.0 || v == FLOE_INTENSITY));
                assert_eq!(a, render(&s, t).unwrap());
            }
        }
    }

    #[test]
    fn integer_translation_shifts_pixel_set() {
        let s = Scenario::new(ScenarioKind::Translate);
        let before = floe_pixels(&render(&s, 0.0).unwrap());
        let after = floe_pixels(&render(&s, 1.0).unwrap());
        let shifted: Vec<usize> = before.iter().map(|i| i + 20).collect();
        assert_eq!(after, shifted);
    }

    #[test]
    fn quad_split_keeps_centroid() {
        let s = Scenario::new(ScenarioKind::SplitQuad);
        let c0 = centroid(&render(&s, 0.0).unwrap());
        for k in 1..=10 {
            let c = centroid(&render(&s, k as f64 / 10.0).unwrap());
            assert!((c.0 - c0.0).hypot(c.1 - c0.1) <= 1.0, "t {k}: {c:?} vs {c0:?}");
        }
    }

    #[test]
    fn unequal_split_is_twenty_eighty() {
        let s = Scenario::new(ScenarioKind::SplitUnequal);
        let whole = &s.fragments()[0];
        let left = whole.region.pixels(s.size).len() as f64;
        let total = floe_pixels(&render(&s, 0.0).unwrap()).len() as f64;
        assert!((left / total - 0.2).abs() < 0.03, "{}", left / total);
    }

    #[test]
    fn area_conserved_for_rigid_motions() {
        for kind in [ScenarioKind::Translate, ScenarioKind::MultiFloe, ScenarioKind::Rotate] {
            let s = Scenario::new(kind);
            let a0 = floe_pixels(&render(&s, 0.0).unwrap()).len() as f64;
            for k in 1..=10 {
                let a = floe_pixels(&render(&s, k as f64 / 10.0).unwrap()).len() as f64;
                assert!((a - a0).abs() <= 0.02 * a0, "{kind:?} t {k}: {a} vs {a0}");
            }
        }
    }

    #[test]
    fn rejects_out_of_range_time() {
        let s = Scenario::new(ScenarioKind::Rotate);
        assert!(render(&s, 1.5).is_err());
        assert!(render(&s, -0.1).is_err());
    }

    #[test]
    fn sweep_curves_start_at_zero() {
        let s = Scenario::new(ScenarioKind::Translate).scaled_to(32);
        let pts = sweep(&s, &[1e-2, 1e-1], 3, &SweepOptions::default()).unwrap();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[0].w_eps_minus_w0, 0.0);
        assert_eq!(pts[3].w_eps_minus_w0, 0.0);
        assert!(pts.iter().all(|p| p.converged));
        assert!(sweep(&s, &[1e-2], 1, &SweepOptions::default()).is_err());
    }
}
