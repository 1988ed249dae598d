//! Subcommand drivers behind the `hmf` binary. Each run reads a scenario,
//! writes its artifacts into an output directory and finishes with a
//! `manifest.json` listing them together with the derived constants.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::appendix::{self, AppendixCheck};
use crate::equilibrium::{kappa_with, solve_self_consistency, Equilibrium};
use crate::error::{HmfError, Result};
use crate::grid::write_grid;
use crate::scenario::{sha256_hex, Scenario};
use crate::spectral::{
    build_perturbed_initial, default_lambda_max, eigenmode_with, equilibrium_grid,
    find_growth_rate_with, log_space, DispersionEvaluator, Eigenmode, GridShape, GrowthRate,
    PerturbationSpec,
};
use crate::vlasov::{
    auto_window, compute_field, default_v_max, eigenmode_residual, evolve, fit_growth_rate,
    fit_magnetization_rate, DiagnosticsRow, Dynamics, EvolveParams, SimDiagnostics,
};

pub const MANIFEST_NAME: &str = "manifest.json";

/// Time step of the eigenmode one-step residual.
pub const MODE_RESIDUAL_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Steady,
    Kappa,
    Dispersion,
    Mode,
    Evolve,
    VerifyAppendix,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Steady => "steady",
            Command::Kappa => "kappa",
            Command::Dispersion => "dispersion",
            Command::Mode => "mode",
            Command::Evolve => "evolve",
            Command::VerifyAppendix => "verify-appendix",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioRef {
    pub name: String,
    pub path: String,
    pub sha256: String,
}

/// Outcome of one perturbed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeltaRun {
    pub delta: f64,
    pub diagnostics: String,
    /// First time `L1_dev ≥ delta0`.
    pub t_delta: Option<f64>,
    pub fit_window: Option<(f64, f64)>,
    pub fitted_rate: Option<f64>,
    /// Rate fitted to `|M - M0|` over the same window.
    pub magnetization_rate: Option<f64>,
    /// Largest relative drift of the mass over the run.
    pub mass_drift: f64,
    /// Largest relative drift of the total energy over the run.
    pub energy_drift: f64,
}

/// Least-squares line `t_δ = intercept + slope ln(1/δ)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeFit {
    pub intercept: f64,
    pub slope: f64,
    /// `1 / λ*`.
    pub expected_slope: f64,
    /// `|slope / expected_slope - 1|`.
    pub slope_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearizedRun {
    pub diagnostics: String,
    pub fit_window: (f64, f64),
    pub fitted_rate: f64,
    pub magnetization_rate: f64,
    pub e_folds: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Derived {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kappa: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda_star: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub root_residual: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_normalization: Option<f64>,
    /// `‖S(dt) h - e^{λ dt} h‖₁ / ‖h‖₁` at `dt = MODE_RESIDUAL_DT`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_residual: Option<f64>,
    /// `G(10³ √m0)`, which tends to 1.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_large_lambda: Option<f64>,
    /// Extrapolated `G(0+)`, which equals `1 - κ`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub g_zero: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta0: Option<f64>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub runs: Vec<DeltaRun>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub escape_fit: Option<EscapeFit>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub linearized: Option<LinearizedRun>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub appendix: Vec<AppendixCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub scenario: ScenarioRef,
    /// Paths relative to the output directory.
    pub artifacts: Vec<String>,
    pub derived: Derived,
}

struct Run {
    out: PathBuf,
    artifacts: Vec<String>,
    derived: Derived,
}

impl Run {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.out.join(name);
        let file = File::create(&path).map_err(|e| HmfError::io(&path, e))?;
        self.artifacts.push(name.to_string());
        Ok(BufWriter::new(file))
    }

    fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let path = self.out.join(name);
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)
            .and_then(|_| w.flush())
            .map_err(|e| HmfError::io(path, e))
    }

    fn write_with(
        &mut self,
        name: &str,
        body: impl FnOnce(&mut BufWriter<File>) -> std::io::Result<()>,
    ) -> Result<()> {
        let path = self.out.join(name);
        let mut w = self.create(name)?;
        body(&mut w)
            .and_then(|_| w.flush())
            .map_err(|e| HmfError::io(path, e))
    }

    fn write_grid(&mut self, name: &str, grid: &crate::grid::PhaseSpaceGrid) -> Result<()> {
        write_grid(grid, self.out.join(name))?;
        self.artifacts.push(name.to_string());
        Ok(())
    }
}

/// Runs `command` on the scenario at `config`. Artifacts go to `out`, or to
/// the scenario's `output_dir` when `out` is `None`.
pub fn run(command: Command, config: &Path, out: Option<&Path>) -> Result<RunManifest> {
    let (scenario, text) = Scenario::load(config)?;
    let out = match (out, &scenario.output_dir) {
        (Some(o), _) => o.to_path_buf(),
        (None, Some(o)) => o.clone(),
        (None, None) => {
            return Err(HmfError::InvalidArgument(
                "no output directory: pass --out or set output_dir".into(),
            ))
        }
    };
    fs::create_dir_all(&out).map_err(|e| HmfError::io(&out, e))?;
    let mut run = Run {
        out: out.clone(),
        artifacts: Vec::new(),
        derived: Derived::default(),
    };
    match command {
        Command::Steady => steady(&scenario, &mut run)?,
        Command::Kappa => kappa(&scenario, &mut run)?,
        Command::Dispersion => dispersion(&scenario, &mut run)?,
        Command::Mode => mode(&scenario, &mut run)?,
        Command::Evolve => evolve_sweep(&scenario, &mut run)?,
        Command::VerifyAppendix => verify_appendix(&mut run)?,
    }
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        subcommand: command.name().to_string(),
        scenario: ScenarioRef {
            name: scenario.name.clone(),
            path: config.display().to_string(),
            sha256: sha256_hex(text.as_bytes()),
        },
        artifacts: run.artifacts,
        derived: run.derived,
    };
    let path = out.join(MANIFEST_NAME);
    let mut w = BufWriter::new(File::create(&path).map_err(|e| HmfError::io(&path, e))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)
        .and_then(|_| w.flush())
        .map_err(|e| HmfError::io(&path, e))?;
    Ok(manifest)
}

fn build_equilibrium(sc: &Scenario, run: &mut Run) -> Result<Equilibrium> {
    let eq = solve_self_consistency(&sc.profile, (sc.m0, sc.m0))?;
    run.derived.m0 = Some(eq.m0);
    run.derived.residual = Some(eq.residual);
    run.derived.amplitude = Some(eq.profile.amplitude);
    Ok(eq)
}

fn steady(sc: &Scenario, run: &mut Run) -> Result<()> {
    let eq = build_equilibrium(sc, run)?;
    run.write_json("equilibrium.json", &eq)
}

fn kappa(sc: &Scenario, run: &mut Run) -> Result<()> {
    let eq = build_equilibrium(sc, run)?;
    let k = kappa_with(&eq, sc.quadrature_shape())?;
    run.derived.kappa = Some(k);
    #[derive(Serialize)]
    struct KappaOut {
        m0: f64,
        kappa: f64,
        quadrature: (usize, usize),
    }
    run.write_json(
        "kappa.json",
        &KappaOut {
            m0: eq.m0,
            kappa: k,
            quadrature: sc.quadrature_shape(),
        },
    )
}

fn lambda_max(sc: &Scenario, eq: &Equilibrium) -> f64 {
    sc.dispersion
        .lambda_max
        .unwrap_or_else(|| default_lambda_max(eq))
}

fn growth_rate(
    sc: &Scenario,
    eq: &Equilibrium,
    eval: &DispersionEvaluator,
    run: &mut Run,
) -> Result<Option<GrowthRate>> {
    let root = find_growth_rate_with(eval, lambda_max(sc, eq))?;
    if let Some(r) = root {
        run.derived.lambda_star = Some(r.lambda_star);
        run.derived.root_residual = Some(r.residual);
    }
    Ok(root)
}

fn require_root(root: Option<GrowthRate>) -> Result<GrowthRate> {
    root.ok_or_else(|| {
        HmfError::InvalidArgument(
            "no growing mode: G has no sign change on the scanned range".into(),
        )
    })
}

fn dispersion(sc: &Scenario, run: &mut Run) -> Result<()> {
    let eq = build_equilibrium(sc, run)?;
    let eval = DispersionEvaluator::with_quadrature(&eq, sc.quadrature_shape())?;
    let d = &sc.dispersion;
    let samples = eval.scan(&log_space(d.lambda_min, lambda_max(sc, &eq), d.samples));
    run.derived.kappa = Some(kappa_with(&eq, sc.quadrature_shape())?);
    run.derived.g_large_lambda = Some(eval.evaluate(1e3 * eq.m0.sqrt()));
    run.derived.g_zero = Some(eval.small_lambda_limit());
    run.write_with("dispersion.csv", |w| {
        writeln!(w, "lambda,G")?;
        for s in &samples {
            writeln!(w, "{:.16e},{:.16e}", s.lambda, s.g)?;
        }
        Ok(())
    })?;
    if let Some(r) = growth_rate(sc, &eq, &eval, run)? {
        run.write_json("growth_rate.json", &r)?;
    }
    Ok(())
}

fn grid_shape(sc: &Scenario, eq: &Equilibrium) -> GridShape {
    let s = &sc.simulation;
    GridShape {
        n_theta: s.n_theta,
        n_v: s.n_v,
        v_max: s.v_max.unwrap_or_else(|| default_v_max(eq)),
    }
}

fn build_mode(sc: &Scenario, run: &mut Run) -> Result<(Equilibrium, Eigenmode)> {
    let eq = build_equilibrium(sc, run)?;
    let eval = DispersionEvaluator::with_quadrature(&eq, sc.quadrature_shape())?;
    let root = require_root(growth_rate(sc, &eq, &eval, run)?)?;
    let mode = eigenmode_with(&eq, &eval, root.lambda_star, grid_shape(sc, &eq))?;
    run.derived.mode_normalization = Some(mode.normalization);
    run.derived.mode_residual = Some(eigenmode_residual(
        &mode.grid,
        mode.lambda_star,
        &eq,
        MODE_RESIDUAL_DT,
    )?);
    Ok((eq, mode))
}

fn mode(sc: &Scenario, run: &mut Run) -> Result<()> {
    let (_, mode) = build_mode(sc, run)?;
    run.write_grid("mode.hmfg", &mode.grid)?;
    #[derive(Serialize)]
    struct ModeOut {
        lambda_star: f64,
        normalization: f64,
        grid_normalization: f64,
        shape: GridShape,
    }
    let g = &mode.grid;
    run.write_json(
        "mode.json",
        &ModeOut {
            lambda_star: mode.lambda_star,
            normalization: mode.normalization,
            grid_normalization: mode.grid_normalization,
            shape: GridShape {
                n_theta: g.n_theta,
                n_v: g.n_v,
                v_max: g.v_max,
            },
        },
    )
}

fn write_diagnostics(run: &mut Run, name: &str, d: &SimDiagnostics) -> Result<()> {
    run.write_with(name, |w| d.write_csv(w))
}

fn evolve_sweep(sc: &Scenario, run: &mut Run) -> Result<()> {
    let (eq, mode) = build_mode(sc, run)?;
    run.derived.kappa = Some(kappa_with(&eq, sc.quadrature_shape())?);
    let lambda_star = mode.lambda_star;
    let s = &sc.simulation;
    run.derived.delta0 = Some(s.delta0);
    let f0 = equilibrium_grid(&eq, grid_shape(sc, &eq))?;
    let field0 = compute_field(&f0);
    let m0 = (field0.mx, field0.my);
    let params = EvolveParams {
        dt: s.dt,
        t_end: s.t_end,
        diag_stride: s.diag_stride,
        dynamics: s.dynamics,
    };
    for (idx, &delta) in s.deltas.iter().enumerate() {
        let spec = PerturbationSpec::new(delta, eq.profile.alpha)?;
        let init = build_perturbed_initial(&eq, &mode, &spec)?;
        let mut snapshots = Vec::new();
        let (diag, _) = evolve(&init, &f0, &eq, &params, |k, g| {
            if s.snapshot_stride > 0 && k % s.snapshot_stride == 0 {
                let name = format!("snapshot_{idx}_{k:07}.hmfg");
                write_grid(g, run.out.join(&name))?;
                snapshots.push(name);
            }
            Ok(())
        })?;
        run.artifacts.extend(snapshots);
        let name = format!("evolve_delta_{delta:e}.csv");
        write_diagnostics(run, &name, &diag)?;
        let fit_window = auto_window(&diag, delta, s.delta0);
        let fitted_rate = fit_window.and_then(|w| fit_growth_rate(&diag, w).ok());
        let magnetization_rate = fit_window.and_then(|w| fit_magnetization_rate(&diag, m0, w).ok());
        run.derived.runs.push(DeltaRun {
            delta,
            diagnostics: name,
            t_delta: diag.first_crossing(s.delta0),
            fit_window,
            fitted_rate,
            magnetization_rate,
            mass_drift: max_drift(&diag, |r| r.mass),
            energy_drift: max_drift(&diag, |r| r.total_energy),
        });
    }
    run.derived.escape_fit = escape_fit(&run.derived.runs, lambda_star);
    if let Some(lin) = &s.linearized {
        // The linearized equation is homogeneous, so the amplitude is free.
        let scale = s.delta0 / mode.grid.l1_norm();
        let mut init = f0.clone();
        for (x, m) in init.values.iter_mut().zip(&mode.grid.values) {
            *x += scale * m;
        }
        let lp = EvolveParams {
            t_end: lin.t_end,
            dynamics: Dynamics::Linearized,
            ..params
        };
        let (diag, _) = evolve(&init, &f0, &eq, &lp, |_, _| Ok(()))?;
        write_diagnostics(run, "linearized.csv", &diag)?;
        let window = (lin.fit_start, lin.t_end);
        let rate = fit_growth_rate(&diag, window)?;
        run.derived.linearized = Some(LinearizedRun {
            diagnostics: "linearized.csv".into(),
            fit_window: window,
            fitted_rate: rate,
            magnetization_rate: fit_magnetization_rate(&diag, m0, window)?,
            e_folds: rate * (lin.t_end - lin.fit_start),
        });
    }
    Ok(())
}

fn max_drift(d: &SimDiagnostics, f: impl Fn(&DiagnosticsRow) -> f64) -> f64 {
    let x0 = d.rows.first().map(&f).unwrap_or(0.0);
    d.rows
        .iter()
        .map(|r| ((f(r) - x0) / x0).abs())
        .fold(0.0, f64::max)
}

/// Fits `t_δ = a + b ln(1/δ)` over the runs that reached `δ0`.
pub fn escape_fit(runs: &[DeltaRun], lambda_star: f64) -> Option<EscapeFit> {
    let (x, t): (Vec<f64>, Vec<f64>) = runs
        .iter()
        .filter_map(|r| r.t_delta.map(|t| (-r.delta.ln(), t)))
        .unzip();
    if x.len() < 2 {
        return None;
    }
    let n = x.len() as f64;
    let (xm, tm) = (x.iter().sum::<f64>() / n, t.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = x
        .iter()
        .zip(&t)
        .map(|(a, b)| (a - xm) * (b - tm))
        .sum::<f64>()
        / sxx;
    let intercept = tm - slope * xm;
    let expected_slope = 1.0 / lambda_star;
    Some(EscapeFit {
        intercept,
        slope,
        expected_slope,
        slope_error: (slope / expected_slope - 1.0).abs(),
    })
}

fn verify_appendix(run: &mut Run) -> Result<()> {
    let table = appendix::check_table()?;
    run.write_with("appendix.csv", |w| {
        writeln!(w, "name,value,expected,error,tolerance,pass")?;
        for c in &table {
            writeln!(
                w,
                "{},{:.16e},{:.16e},{:.16e},{:.16e},{}",
                c.name, c.value, c.expected, c.error, c.tolerance, c.pass
            )?;
        }
        Ok(())
    })?;
    run.derived.appendix = table;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn escape_fit_recovers_line() {
        let runs: Vec<DeltaRun> = [1e-4, 1e-5, 1e-6]
            .iter()
            .map(|&d: &f64| DeltaRun {
                delta: d,
                diagnostics: String::new(),
                t_delta: Some(0.5 + 2.0 * (1.0 / d).ln()),
                fit_window: None,
                fitted_rate: None,
                magnetization_rate: None,
                mass_drift: 0.0,
                energy_drift: 0.0,
            })
            .collect();
        let fit = escape_fit(&runs, 0.5).unwrap();
        assert!((fit.slope - 2.0).abs() < 1e-10);
        assert!((fit.intercept - 0.5).abs() < 1e-9);
        assert!(fit.slope_error < 1e-10);
    }

    #[test]
    fn escape_fit_needs_two_crossings() {
        let one = DeltaRun {
            delta: 1e-3,
            diagnostics: String::new(),
            t_delta: Some(1.0),
            fit_window: None,
            fitted_rate: None,
            magnetization_rate: None,
            mass_drift: 0.0,
            energy_drift: 0.0,
        };
        let none = DeltaRun {
            t_delta: None,
            ..one.clone()
        };
        assert!(escape_fit(&[one, none], 1.0).is_none());
    }
}
