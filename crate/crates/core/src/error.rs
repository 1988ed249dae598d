use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the numerical modules and the scenario front end.
#[derive(Debug, Error)]
pub enum HmfError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("period diverges: energy {e0} lies in the separatrix band of m0 = {m0}")]
    PeriodDiverges { e0: f64, m0: f64 },

    #[error("no orbit: energy {e0} is below the potential minimum -{m0}")]
    NoOrbit { e0: f64, m0: f64 },

    #[error("shape cannot magnetize: gamma(m0 = {m0}) = {gamma} is not positive")]
    ShapeCannotMagnetize { m0: f64, gamma: f64 },

    #[error("profile cutoff e_star = {e_star} must lie below m0 = {m0}")]
    CutoffAboveSeparatrix { e_star: f64, m0: f64 },

    #[error("not a root: |G({lambda})| = {residual} exceeds {tolerance}")]
    NotARoot {
        lambda: f64,
        residual: f64,
        tolerance: f64,
    },

    #[error("delta too large: node (i_theta = {i_theta}, i_v = {i_v}) would become {value}")]
    DeltaTooLarge {
        i_theta: usize,
        i_v: usize,
        value: f64,
    },

    #[error("velocity box too small: |f| = {value} at v = {v} beyond 0.9 * v_max = {limit}")]
    VelocityBoxTooSmall { v: f64, value: f64, limit: f64 },

    #[error("grid shape mismatch: {0}")]
    GridMismatch(String),

    #[error("growth fit failed: {0}")]
    GrowthFit(String),

    #[error("bad grid file: expected magic {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },

    #[error("unsupported grid format version {found} (expected {expected})")]
    BadVersion { expected: u32, found: u32 },

    #[error("truncated grid file: header announces {expected} values, payload holds {found}")]
    Truncated { expected: u64, found: u64 },

    #[error("config error at line {line}: {message}")]
    Config { line: usize, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = HmfError> = std::result::Result<T, E>;

impl HmfError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HmfError::Io {
            path: path.into(),
            source,
        }
    }
}
