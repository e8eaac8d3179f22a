use std::path::PathBuf;

/// Errors produced by the deformation pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed raster: {0}")]
    Format(String),

    #[error("raster payload does not match header: expected {expected} bytes, found {found}")]
    Truncation { expected: usize, found: usize },

    #[error("invalid raster metadata: {0}")]
    Metadata(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("grid of {pixels} pixels exceeds the {limit}-pixel limit of {what}; {hint}")]
    Scale {
        what: &'static str,
        pixels: usize,
        limit: usize,
        hint: &'static str,
    },

    #[error("non-finite value encountered in {0}")]
    Numeric(&'static str),

    #[error(
        "scaling vector {vector} left the floating-point range at iteration {iteration}; \
         increase epsilon or enable log-domain stabilization"
    )]
    Stabilization { vector: &'static str, iteration: usize },

    #[error("scaling pair has not converged (residual {residual:e} after {iterations} iterations)")]
    Stale { iterations: usize, residual: f64 },

    #[error("marginals are unbalanced: source sums to {source_total}, target to {target_total}")]
    Balance { source_total: f64, target_total: f64 },

    #[error("geometry mismatch: {0}")]
    Geometry(String),

    #[error("sweep point eps={eps}, t={t}: {source}")]
    Sweep {
        eps: f64,
        t: f64,
        #[source]
        source: Box<Error>,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
