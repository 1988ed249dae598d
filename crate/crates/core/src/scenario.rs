//! Scenario documents: one JSON file describing a steady state and the runs
//! to perform on it.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HmfError, Result};
use crate::profile::Profile;
use crate::vlasov::Dynamics;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Profile shape; the amplitude is rescaled to make `m0` self-consistent.
    pub profile: Profile,
    pub m0: f64,
    #[serde(default)]
    pub quadrature: Option<[usize; 2]>,
    #[serde(default)]
    pub dispersion: DispersionConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    /// Overridden by `--out`.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DispersionConfig {
    pub lambda_min: f64,
    /// Defaults to `10 √m0`.
    pub lambda_max: Option<f64>,
    pub samples: usize,
}

impl Default for DispersionConfig {
    fn default() -> Self {
        Self {
            lambda_min: 1e-3,
            lambda_max: None,
            samples: 64,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationConfig {
    pub n_theta: usize,
    pub n_v: usize,
    /// Defaults to twice the largest speed in the support of `f0`.
    pub v_max: Option<f64>,
    pub dt: f64,
    pub t_end: f64,
    pub deltas: Vec<f64>,
    /// Deviation that defines the escape time.
    pub delta0: f64,
    pub dynamics: Dynamics,
    /// Steps between diagnostics rows.
    pub diag_stride: usize,
    /// Steps between grid snapshots; 0 writes none.
    pub snapshot_stride: usize,
    pub linearized: Option<LinearizedConfig>,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_theta: 256,
            n_v: 257,
            v_max: None,
            dt: 0.01,
            t_end: 16.0,
            deltas: vec![1e-4, 1e-5, 1e-6],
            delta0: 1e-2,
            dynamics: Dynamics::Perturbation,
            diag_stride: 10,
            snapshot_stride: 0,
            linearized: None,
        }
    }
}

/// Linearized run of the eigenmode, fitted on `[fit_start, t_end]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LinearizedConfig {
    pub t_end: f64,
    pub fit_start: f64,
}

impl Scenario {
    /// Parses and validates `text`. Every error carries the line it refers to.
    pub fn parse(text: &str) -> Result<Self> {
        let sc: Scenario = serde_json::from_str(text).map_err(|e| HmfError::Config {
            line: e.line().max(1),
            message: e.to_string(),
        })?;
        sc.validate(text)?;
        Ok(sc)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<(Self, String)> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| HmfError::io(path, e))?;
        Ok((Self::parse(&text)?, text))
    }

    fn validate(&self, text: &str) -> Result<()> {
        let fail = |key: &str, message: String| {
            Err(HmfError::Config {
                line: line_of_key(text, key),
                message,
            })
        };
        let positive = |x: f64| x.is_finite() && x > 0.0;
        if self.name.trim().is_empty() {
            return fail("name", "name must not be empty".into());
        }
        if !positive(self.m0) {
            return fail("m0", format!("m0 must be positive, got {}", self.m0));
        }
        if let Err(e) = self.profile.validate() {
            return fail("profile", e.to_string());
        }
        if let Some([a, b]) = self.quadrature {
            if a < 8 || b < 8 {
                return fail(
                    "quadrature",
                    format!("quadrature needs at least 8x8 nodes, got {a}x{b}"),
                );
            }
        }
        let d = &self.dispersion;
        if !positive(d.lambda_min) {
            return fail(
                "lambda_min",
                format!("lambda_min must be positive, got {}", d.lambda_min),
            );
        }
        if let Some(hi) = d.lambda_max {
            if !(positive(hi) && hi > d.lambda_min) {
                return fail(
                    "lambda_max",
                    format!("lambda_max must exceed lambda_min, got {hi}"),
                );
            }
        }
        if d.samples < 2 {
            return fail(
                "samples",
                format!("need at least 2 samples, got {}", d.samples),
            );
        }
        let s = &self.simulation;
        if s.n_theta < 8 || s.n_v < 8 {
            return fail(
                "n_theta",
                format!("grid needs at least 8x8 nodes, got {}x{}", s.n_theta, s.n_v),
            );
        }
        if let Some(v) = s.v_max {
            if !positive(v) {
                return fail("v_max", format!("v_max must be positive, got {v}"));
            }
        }
        if !positive(s.dt) {
            return fail("dt", format!("dt must be positive, got {}", s.dt));
        }
        if !positive(s.t_end) {
            return fail("t_end", format!("t_end must be positive, got {}", s.t_end));
        }
        if s.deltas.is_empty() {
            return fail("deltas", "deltas must not be empty".into());
        }
        if let Some(bad) = s.deltas.iter().find(|&&x| !positive(x)) {
            return fail("deltas", format!("every delta must be positive, got {bad}"));
        }
        if !positive(s.delta0) {
            return fail(
                "delta0",
                format!("delta0 must be positive, got {}", s.delta0),
            );
        }
        if s.diag_stride == 0 {
            return fail("diag_stride", "diag_stride must be positive".into());
        }
        if let Some(l) = &s.linearized {
            if !(positive(l.t_end) && l.fit_start >= 0.0 && l.fit_start < l.t_end) {
                return fail(
                    "fit_start",
                    format!(
                        "need 0 <= fit_start < t_end, got {} and {}",
                        l.fit_start, l.t_end
                    ),
                );
            }
        }
        Ok(())
    }

    pub fn quadrature_shape(&self) -> (usize, usize) {
        self.quadrature
            .map(|[a, b]| (a, b))
            .unwrap_or(crate::equilibrium::DEFAULT_QUADRATURE)
    }
}

/// 1-based line of the first occurrence of `"key"` in `text`, or 1.
pub fn line_of_key(text: &str, key: &str) -> usize {
    let needle = format!("\"{key}\"");
    text.find(&needle)
        .map(|at| text[..at].matches('\n').count() + 1)
        .unwrap_or(1)
}

/// Lowercase hex SHA-256 of `bytes`.
pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}
