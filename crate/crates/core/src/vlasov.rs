//! Semi-Lagrangian evolution of the HMF equation and of its linearization
//! about a steady state.
//!
//! Both solvers use Strang splitting: half a step of free streaming in θ,
//! a full kick in v under the force evaluated at the half step, and another
//! half step in θ. Shifts are interpolated with cubic B-splines, periodic in
//! θ and zero-extended beyond `±v_max` in v.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::equilibrium::Equilibrium;
use crate::error::{HmfError, Result};
use crate::grid::PhaseSpaceGrid;
use crate::quadrature::pairwise_sum;
use crate::spline::{PeriodicSpline, ShiftWork};

/// Fraction of `v_max` beyond which the solution must vanish.
pub const SUPPORT_FRACTION: f64 = 0.9;
/// Values below this fraction of `max |f|` count as zero for the support check.
pub const SUPPORT_THRESHOLD: f64 = 1e-9;
/// Zero padding (in cells) added on each side of a velocity column.
const V_PADDING: usize = 32;

/// Magnetization, potential and force at the θ nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldState {
    pub mx: f64,
    pub my: f64,
    pub potential: Vec<f64>,
    pub force: Vec<f64>,
}

impl FieldState {
    fn from_moments(mx: f64, my: f64, n_theta: usize, d_theta: f64) -> Self {
        let (potential, force) = (0..n_theta)
            .map(|i| {
                let (s, c) = (d_theta * i as f64).sin_cos();
                (-mx * c - my * s, -mx * s + my * c)
            })
            .unzip();
        Self {
            mx,
            my,
            potential,
            force,
        }
    }
}

/// `ρ(θ_i) = ∫ f(θ_i, v) dv` at every θ node.
pub fn density(grid: &PhaseSpaceGrid) -> Vec<f64> {
    let dv = grid.dv();
    (0..grid.n_theta)
        .into_par_iter()
        .map(|i| pairwise_sum(grid.row(i)) * dv)
        .collect()
}

/// `M = ∬ f (cos θ, sin θ)` with `φ = -M · (cos θ, sin θ)` and `E = -∂θ φ`.
pub fn compute_field(grid: &PhaseSpaceGrid) -> FieldState {
    let rho = density(grid);
    let dt = grid.d_theta();
    let cx: Vec<f64> = rho
        .iter()
        .enumerate()
        .map(|(i, r)| r * (dt * i as f64).cos())
        .collect();
    let sy: Vec<f64> = rho
        .iter()
        .enumerate()
        .map(|(i, r)| r * (dt * i as f64).sin())
        .collect();
    let mx = pairwise_sum(&cx) * dt;
    let my = pairwise_sum(&sy) * dt;
    FieldState::from_moments(mx, my, grid.n_theta, dt)
}

fn check_dt(dt: f64) -> Result<()> {
    if !(dt.is_finite() && dt != 0.0) {
        return Err(HmfError::InvalidArgument(format!(
            "time step must be finite and nonzero, got {dt}"
        )));
    }
    Ok(())
}

/// Free streaming `f(θ, v) ← f(θ - v τ, v)`.
fn advect_theta(grid: &mut PhaseSpaceGrid, tau: f64) {
    let (nt, nv) = (grid.n_theta, grid.n_v);
    let d_theta = grid.d_theta();
    let spline = PeriodicSpline::new(nt);
    let mut rows = vec![0.0; nt * nv];
    // Transpose to v-major so each θ series is contiguous.
    for i in 0..nt {
        for j in 0..nv {
            rows[j * nt + i] = grid.values[i * nv + j];
        }
    }
    let v_max = grid.v_max;
    let dv = grid.dv();
    rows.par_chunks_mut(nt)
        .enumerate()
        .for_each_init(ShiftWork::default, |work, (j, row)| {
            let v = -v_max + dv * j as f64;
            spline.shift(row, v * tau / d_theta, work);
        });
    for i in 0..nt {
        for j in 0..nv {
            grid.values[i * nv + j] = rows[j * nt + i];
        }
    }
}

/// Kick `f(θ, v) ← f(θ, v - E(θ) τ)` with zero values beyond `±v_max`.
fn advect_v(grid: &mut PhaseSpaceGrid, force: &[f64], tau: f64) {
    let nv = grid.n_v;
    let dv = grid.dv();
    let max_shift = force
        .iter()
        .fold(0.0f64, |a, e| a.max((e * tau / dv).abs()));
    let pad = V_PADDING + max_shift.ceil() as usize + 2;
    let len = nv + 2 * pad;
    let spline = PeriodicSpline::new(len);
    grid.values
        .par_chunks_mut(nv)
        .zip(force.par_iter())
        .for_each_init(
            || (ShiftWork::default(), vec![0.0; len]),
            |(work, buf), (col, &e)| {
                let s = e * tau / dv;
                if s == 0.0 {
                    return;
                }
                buf.fill(0.0);
                buf[pad..pad + nv].copy_from_slice(col);
                spline.shift(buf, s, work);
                col.copy_from_slice(&buf[pad..pad + nv]);
            },
        );
}

/// Errors if the solution has reached `|v| > 0.9 v_max`.
pub fn check_support(grid: &PhaseSpaceGrid) -> Result<()> {
    check_support_scaled(grid, 0.0)
}

/// As [`check_support`], with "zero" measured against `max(max |f|, scale)`.
pub fn check_support_scaled(grid: &PhaseSpaceGrid, scale: f64) -> Result<()> {
    let peak = grid.values.iter().fold(scale, |a, x| a.max(x.abs()));
    if peak == 0.0 {
        return Ok(());
    }
    let limit = SUPPORT_FRACTION * grid.v_max;
    let floor = SUPPORT_THRESHOLD * peak;
    for j in 0..grid.n_v {
        let v = grid.v(j);
        if v.abs() <= limit {
            continue;
        }
        for i in 0..grid.n_theta {
            let x = grid.at(i, j);
            if x.abs() > floor {
                return Err(HmfError::VelocityBoxTooSmall { v, value: x, limit });
            }
        }
    }
    Ok(())
}

/// One Strang step of the nonlinear equation `∂t f + v ∂θ f + E_f ∂v f = 0`.
/// A negative `dt` runs the same scheme backward.
pub fn step_nonlinear(grid: &PhaseSpaceGrid, dt: f64) -> Result<PhaseSpaceGrid> {
    check_dt(dt)?;
    let mut g = grid.clone();
    advect_theta(&mut g, 0.5 * dt);
    let field = compute_field(&g);
    advect_v(&mut g, &field.force, dt);
    advect_theta(&mut g, 0.5 * dt);
    check_support(&g)?;
    Ok(g)
}

/// One Strang step of `∂t h + v ∂θ h + E0 ∂v h + E_h ∂v f0 = 0`, with
/// `E0 = -m0 sin θ` and `∂v f0 = v F'(e0)` evaluated analytically. The source
/// is integrated exactly along the kick.
pub fn step_linearized(grid: &PhaseSpaceGrid, eq: &Equilibrium, dt: f64) -> Result<PhaseSpaceGrid> {
    step_deviation(grid, eq, dt, false)
}

/// One Strang step of the full nonlinear equation written for `h = f - f0`:
/// `∂t h + v ∂θ h + (E0 + E_h) ∂v h + E_h ∂v f0 = 0`.
///
/// This is the same equation as [`step_nonlinear`] solves, but the steady
/// part is carried analytically, so `h = 0` stays exactly zero however thin
/// the features of `f0` are compared with the grid.
pub fn step_perturbation(
    grid: &PhaseSpaceGrid,
    eq: &Equilibrium,
    dt: f64,
) -> Result<PhaseSpaceGrid> {
    step_deviation(grid, eq, dt, true)
}

fn step_deviation(
    grid: &PhaseSpaceGrid,
    eq: &Equilibrium,
    dt: f64,
    nonlinear: bool,
) -> Result<PhaseSpaceGrid> {
    check_dt(dt)?;
    let mut g = grid.clone();
    advect_theta(&mut g, 0.5 * dt);
    let field = compute_field(&g);
    let (nt, nv) = (g.n_theta, g.n_v);
    let d_theta = g.d_theta();
    let kick: Vec<f64> = (0..nt)
        .map(|i| {
            let e0 = -eq.m0 * (d_theta * i as f64).sin();
            if nonlinear {
                e0 + field.force[i]
            } else {
                e0
            }
        })
        .collect();
    advect_v(&mut g, &kick, dt);
    let (v_max, dv, m0) = (g.v_max, g.dv(), eq.m0);
    g.values
        .par_chunks_mut(nv)
        .enumerate()
        .for_each(|(i, col)| {
            let c = (d_theta * i as f64).cos();
            let eh = field.force[i];
            if eh == 0.0 {
                return;
            }
            let a = kick[i];
            let f0 = |v: f64| eq.profile.value(0.5 * v * v - m0 * c);
            for (j, x) in col.iter_mut().enumerate() {
                let v = -v_max + dv * j as f64;
                // Along the kick v(s) = v - a (dt - s), so the source
                // integrates exactly to (E_h / a) (f0(v) - f0(v - a dt)).
                if (a * dt).abs() > 1e-9 * dv {
                    *x -= eh / a * (f0(v) - f0(v - a * dt));
                } else {
                    *x -= dt * eh * v * eq.profile.derivative(0.5 * v * v - m0 * c);
                }
            }
        });
    advect_theta(&mut g, 0.5 * dt);
    // The nonlinear deviation is measured on the scale of f0 itself, the
    // linear one only relative to its own size.
    let scale = if nonlinear { eq.density(0.0, 0.0) } else { 0.0 };
    check_support_scaled(&g, scale)?;
    Ok(g)
}

/// One-step defect of a growing mode: `‖S(dt) h - e^{λ dt} h‖₁ / ‖h‖₁` with
/// `S` the linearized step.
pub fn eigenmode_residual(
    mode: &PhaseSpaceGrid,
    lambda: f64,
    eq: &Equilibrium,
    dt: f64,
) -> Result<f64> {
    let stepped = step_linearized(mode, eq, dt)?;
    let growth = (lambda * dt).exp();
    let mut expected = mode.clone();
    for x in &mut expected.values {
        *x *= growth;
    }
    Ok(stepped.l1_distance(&expected)? / mode.l1_norm())
}

/// One diagnostics sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub mass: f64,
    pub kinetic: f64,
    pub total_energy: f64,
    #[serde(rename = "Mx")]
    pub mx: f64,
    #[serde(rename = "My")]
    pub my: f64,
    #[serde(rename = "L1_dev")]
    pub l1_dev: f64,
    /// `∬ max(-f, 0)`: interpolation undershoot, reported and never clipped.
    pub undershoot: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "t,mass,kinetic,total_energy,Mx,My,L1_dev";

/// `mass`, kinetic and total energy (`kinetic - |M|²/2`), magnetization and
/// `‖f - f0‖₁` against `reference`.
pub fn diagnostics(
    grid: &PhaseSpaceGrid,
    reference: &PhaseSpaceGrid,
    t: f64,
) -> Result<DiagnosticsRow> {
    let l1_dev = grid.l1_distance(reference)?;
    let field = compute_field(grid);
    let cell = grid.cell();
    let (nv, v_max, dv) = (grid.n_v, grid.v_max, grid.dv());
    let kin: Vec<f64> = grid
        .values
        .par_chunks(nv)
        .map(|col| {
            let t: Vec<f64> = col
                .iter()
                .enumerate()
                .map(|(j, x)| {
                    let v = -v_max + dv * j as f64;
                    0.5 * v * v * x
                })
                .collect();
            pairwise_sum(&t)
        })
        .collect();
    let kinetic = pairwise_sum(&kin) * cell;
    let neg: Vec<f64> = grid.values.iter().map(|x| (-x).max(0.0)).collect();
    Ok(DiagnosticsRow {
        t,
        mass: grid.integral(),
        kinetic,
        total_energy: kinetic - 0.5 * (field.mx * field.mx + field.my * field.my),
        mx: field.mx,
        my: field.my,
        l1_dev,
        undershoot: pairwise_sum(&neg) * cell,
    })
}

/// Time-ordered diagnostics of one run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimDiagnostics {
    pub rows: Vec<DiagnosticsRow>,
}

impl SimDiagnostics {
    pub fn write_csv(&self, mut w: impl Write) -> std::io::Result<()> {
        writeln!(w, "{DIAGNOSTICS_HEADER}")?;
        for r in &self.rows {
            writeln!(
                w,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                r.t, r.mass, r.kinetic, r.total_energy, r.mx, r.my, r.l1_dev
            )?;
        }
        Ok(())
    }

    pub fn times(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.t).collect()
    }

    pub fn l1_deviation(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.l1_dev).collect()
    }

    /// First time `L1_dev ≥ threshold`, interpolated log-linearly between rows.
    pub fn first_crossing(&self, threshold: f64) -> Option<f64> {
        crossing_time(&self.times(), &self.l1_deviation(), threshold)
    }
}

/// First time the series reaches `threshold`, interpolated in `log y`.
pub fn crossing_time(t: &[f64], y: &[f64], threshold: f64) -> Option<f64> {
    let k = y.iter().position(|&d| d >= threshold)?;
    if k == 0 {
        return Some(t[0]);
    }
    let (y0, y1) = (y[k - 1], y[k]);
    if y0 > 0.0 && y1 > y0 {
        let s = (threshold.ln() - y0.ln()) / (y1.ln() - y0.ln());
        Some(t[k - 1] + s * (t[k] - t[k - 1]))
    } else {
        Some(t[k])
    }
}

/// Least-squares slope of `ln y` against `t` over rows with `t` in `window`.
pub fn fit_growth_rate(series: &SimDiagnostics, window: (f64, f64)) -> Result<f64> {
    fit_log_slope(&series.times(), &series.l1_deviation(), window)
}

/// Same fit on `|M - M0|`, the magnetization distance from `m0 = (Mx, My)`.
pub fn fit_magnetization_rate(
    series: &SimDiagnostics,
    m0: (f64, f64),
    window: (f64, f64),
) -> Result<f64> {
    let dm: Vec<f64> = series
        .rows
        .iter()
        .map(|r| (r.mx - m0.0).hypot(r.my - m0.1))
        .collect();
    fit_log_slope(&series.times(), &dm, window)
}

pub fn fit_log_slope(t: &[f64], y: &[f64], window: (f64, f64)) -> Result<f64> {
    let (a, b) = window;
    let pts: Vec<(f64, f64)> = t
        .iter()
        .zip(y)
        .filter(|(&ti, _)| ti >= a && ti <= b)
        .map(|(&ti, &yi)| (ti, yi))
        .collect();
    if pts.len() < 2 {
        return Err(HmfError::GrowthFit(format!(
            "window [{a}, {b}] holds {} samples, need at least 2",
            pts.len()
        )));
    }
    if let Some(&(ti, yi)) = pts.iter().find(|(_, yi)| !(*yi > 0.0)) {
        return Err(HmfError::GrowthFit(format!(
            "nonpositive deviation {yi} at t = {ti}"
        )));
    }
    let n = pts.len() as f64;
    let tm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let lm = pts.iter().map(|p| p.1.ln()).sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for &(ti, yi) in &pts {
        sxy += (ti - tm) * (yi.ln() - lm);
        sxx += (ti - tm) * (ti - tm);
    }
    if sxx == 0.0 {
        return Err(HmfError::GrowthFit("window holds a single time".into()));
    }
    Ok(sxy / sxx)
}

/// Growth window from the first time `L1_dev ≥ 3 δ` to the first time it
/// reaches `ceiling` or a tenth of its maximum over the run, whichever is
/// lower, so the fit stays clear of saturation.
pub fn auto_window(series: &SimDiagnostics, delta: f64, ceiling: f64) -> Option<(f64, f64)> {
    let t = series.times();
    let y = series.l1_deviation();
    let peak = y.iter().cloned().fold(0.0, f64::max);
    let start = crossing_time(&t, &y, 3.0 * delta)?;
    let end = crossing_time(&t, &y, ceiling.min(0.1 * peak))?;
    (end > start).then_some((start, end))
}

/// Which equation to integrate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Dynamics {
    /// [`step_nonlinear`] on the full distribution.
    Nonlinear,
    /// [`step_perturbation`] on `f - f0`.
    Perturbation,
    /// [`step_linearized`] on `f - f0`.
    Linearized,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolveParams {
    pub dt: f64,
    pub t_end: f64,
    /// Steps between diagnostics rows.
    pub diag_stride: usize,
    pub dynamics: Dynamics,
}

/// Integrates from `initial` (the full distribution) to `t_end`, recording
/// diagnostics against `reference`. For the two deviation dynamics the state
/// is `initial - reference` and diagnostics are taken on `reference + h`.
/// `on_step(step, f)` receives the full distribution after every step.
pub fn evolve(
    initial: &PhaseSpaceGrid,
    reference: &PhaseSpaceGrid,
    eq: &Equilibrium,
    params: &EvolveParams,
    mut on_step: impl FnMut(usize, &PhaseSpaceGrid) -> Result<()>,
) -> Result<(SimDiagnostics, PhaseSpaceGrid)> {
    check_dt(params.dt)?;
    if !(params.dt > 0.0 && params.t_end >= 0.0) || params.diag_stride == 0 {
        return Err(HmfError::InvalidArgument(format!(
            "need dt > 0, t_end ≥ 0 and a positive stride, got {params:?}"
        )));
    }
    initial.same_shape(reference)?;
    let steps = (params.t_end / params.dt).round() as usize;
    let full_f = params.dynamics == Dynamics::Nonlinear;
    let mut state = initial.clone();
    if !full_f {
        for (h, r) in state.values.iter_mut().zip(&reference.values) {
            *h -= r;
        }
    }
    let assemble = |state: &PhaseSpaceGrid| {
        let mut f = state.clone();
        if !full_f {
            for (x, r) in f.values.iter_mut().zip(&reference.values) {
                *x += r;
            }
        }
        f
    };
    let mut out = SimDiagnostics::default();
    out.rows.push(diagnostics(initial, reference, 0.0)?);
    let mut f = initial.clone();
    for k in 1..=steps {
        state = match params.dynamics {
            Dynamics::Nonlinear => step_nonlinear(&state, params.dt)?,
            Dynamics::Perturbation => step_perturbation(&state, eq, params.dt)?,
            Dynamics::Linearized => step_linearized(&state, eq, params.dt)?,
        };
        f = assemble(&state);
        on_step(k, &f)?;
        if k % params.diag_stride == 0 || k == steps {
            let mut row = diagnostics(&f, reference, k as f64 * params.dt)?;
            if !full_f {
                // Exact deviation, free of the rounding in `reference + h`.
                row.l1_dev = state.l1_norm();
            }
            out.rows.push(row);
        }
    }
    Ok((out, f))
}

/// Default velocity box `2 sqrt(2 (e_star + m0))`, twice the support edge.
pub fn default_v_max(eq: &Equilibrium) -> f64 {
    2.0 * eq.support_speed()
}
