//! Dense deformation between two co-registered single-band images via
//! entropy-regularized optimal transport.
//!
//! Images are normalized into probability mass fields ([`raster`]), coupled by
//! Sinkhorn diagonal scaling against the Gibbs kernel of the squared Euclidean
//! ground cost ([`otcore`]), and the coupling is post-processed into per-pixel
//! transport distance, barycentric displacement, velocity and incremental
//! strain ([`fields`]). An exact linear-programming solver for tiny grids
//! ([`oracle`]), a windowed normalized cross-correlation baseline ([`ncc`]) and
//! synthetic floe scenarios ([`synth`]) support validation.
//!
//! Coordinates are normalized so that pixel centers of the longer image axis
//! lie inside `[0, 1]`; the regularization strength `epsilon` is expressed in
//! squared units of that normalized length.
//!
//! ```
//! use seaice_ot::prelude::*;
//!
//! let geometry = GridGeometry::new(8, 8, 250.0).unwrap();
//! let mut src = vec![0.0; 64];
//! let mut tgt = vec![0.0; 64];
//! src[8 * 3 + 2] = 255.0;
//! tgt[8 * 3 + 4] = 255.0;
//! let p = normalize_to_mass(&IntensityRaster::new(geometry, src, 0.0).unwrap(), 1e-10, None).unwrap();
//! let q = normalize_to_mass(&IntensityRaster::new(geometry, tgt, 86_400.0).unwrap(), 1e-10, None).unwrap();
//!
//! let kernel = GibbsKernel::new(KernelSpec::dense(1e-2), geometry).unwrap();
//! let pair = sinkhorn(&p, &q, &kernel, &SinkhornOptions::default()).unwrap();
//! assert!(pair.converged);
//! let w = wasserstein_value(&p, &q, &pair).unwrap();
//! // Two pixels of displacement on an 8-pixel axis: (2/8)^2.
//! assert!((w - 0.0625).abs() < 0.05);
//! ```

// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fields;
pub mod ncc;
pub mod oracle;
pub mod otcore;
pub mod raster;
pub mod synth;

pub use error::{Error, Result};

/// Everything needed to run the pipeline end to end.
pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::fields::{
        barycentric_map, principal_strain, strain, transport_distance, velocity,
        BarycentricMap, StrainField, TransportSummary, VelocityField,
    };
    pub use crate::ncc::{ncc_displacements, NccMatch, NccParams};
    pub use crate::oracle::{exact_wasserstein, ExactPlan};
    pub use crate::otcore::{
        build_cost, dense_coupling, sinkhorn, transport_cost_rows, wasserstein_value,
        wasserstein_value_unchecked,
        CostMatrix, DenseCoupling, GibbsKernel, KernelMode, KernelSpec, ScalingPair,
        SinkhornOptions, Stabilization,
    };
    pub use crate::raster::{
        apply_ice_mask, equalize_contrast, normalize_to_mass, GridGeometry, IntensityRaster,
        MassField, DEFAULT_FLOOR, DEFAULT_ICE_THRESHOLD,
    };
    pub use crate::synth::{render, sweep, FloeShape, Scenario, ScenarioKind, SweepOptions, SweepPoint};
}
