//! Dispersion function, growth rate, unstable eigenmode and perturbed data.
//!
//! For a point on a closed characteristic, `s ↦ cos Θ(-s)` is periodic with
//! the orbit period `T`. Writing it as a Fourier series
//! `Σ C_n e^{i n ω s}` with `ω = 2π / T`, the weighted time average
//! `g_λ = ∫_{-∞}^0 λ e^{λ s} cos Θ(s) ds` becomes
//! `C_0 + 2 Re Σ_{n ≥ 1} C_n λ / (λ - i n ω)`, which is exactly the
//! one-period geometric-series reduction `λ / (1 - e^{-λT}) ∫_0^T …`.
//! The coefficients are computed once per point, after which every `λ`
//! costs a short sum.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::equilibrium::{Equilibrium, PhaseQuadrature, DEFAULT_QUADRATURE};
use crate::error::{HmfError, Result};
use crate::grid::PhaseSpaceGrid;
use crate::pendulum::{Pendulum, Regime};
use crate::profile::smooth_step;
use crate::quadrature::pairwise_sum;

/// Samples per period used for the Fourier coefficients of `cos Θ`.
pub const ORBIT_SAMPLES: usize = 256;
/// Root-search tolerance on `|G(λ*)|`.
pub const ROOT_TOLERANCE: f64 = 1e-8;
/// Tolerance on `|G(λ)|` accepted by [`eigenmode`].
pub const EIGENMODE_ROOT_TOLERANCE: f64 = 1e-6;
/// Number of logarithmic samples in the root search.
pub const ROOT_SCAN_SAMPLES: usize = 64;
/// Smallest `λ` sampled by the root search.
pub const ROOT_SCAN_MIN: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionSample {
    pub lambda: f64,
    #[serde(rename = "G")]
    pub g: f64,
}

/// Fourier coefficients of `s ↦ cos Θ(-s, θ, v)` over one period.
#[derive(Debug, Clone)]
pub struct OrbitSpectrum {
    omega: f64,
    coeffs: Vec<Complex64>,
}

impl OrbitSpectrum {
    pub fn new(pend: &Pendulum, theta: f64, v: f64) -> Result<Self> {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(ORBIT_SAMPLES);
        Self::with_fft(pend, theta, v, &fft)
    }

    fn with_fft(
        pend: &Pendulum,
        theta: f64,
        v: f64,
        fft: &Arc<dyn rustfft::Fft<f64>>,
    ) -> Result<Self> {
        let e0 = crate::pendulum::energy(theta, v, pend.m0());
        match pend.regime(e0) {
            Regime::Separatrix => return Err(HmfError::PeriodDiverges { e0, m0: pend.m0() }),
            Regime::FixedPoint => {
                return Ok(Self {
                    omega: 0.0,
                    coeffs: vec![Complex64::new(theta.cos(), 0.0)],
                })
            }
            Regime::Librating | Regime::Rotating => {}
        }
        let period = pend.period(e0)?;
        let n = ORBIT_SAMPLES;
        let samples = pend.sample_trajectory(theta, v, -period / n as f64, n);
        let mut buf: Vec<Complex64> = samples
            .iter()
            .map(|&(t, _)| Complex64::new(t.cos(), 0.0))
            .collect();
        fft.process(&mut buf);
        let scale = 1.0 / n as f64;
        let mut coeffs: Vec<Complex64> = buf[..=n / 2].iter().map(|c| c * scale).collect();
        // The Nyquist bin is shared between ±n/2.
        coeffs[n / 2] *= 0.5;
        let keep = coeffs
            .iter()
            .rposition(|c| c.norm() > 1e-18)
            .map_or(1, |k| k + 1);
        coeffs.truncate(keep);
        Ok(Self {
            omega: std::f64::consts::TAU / period,
            coeffs,
        })
    }

    /// `g_λ` at the sampled point.
    pub fn g(&self, lambda: f64) -> f64 {
        let mut acc = 0.0;
        for (k, c) in self.coeffs.iter().enumerate().skip(1).rev() {
            let nw = k as f64 * self.omega;
            let den = lambda * lambda + nw * nw;
            acc += (c.re * lambda * lambda - c.im * lambda * nw) / den;
        }
        self.coeffs[0].re + 2.0 * acc
    }
}

fn shared_fft() -> Arc<dyn rustfft::Fft<f64>> {
    FftPlanner::new().plan_fft_forward(ORBIT_SAMPLES)
}

/// `g_λ(θ, v) = ∫_{-∞}^0 λ e^{λ s} cos Θ(s, θ, v) ds` for the characteristics
/// of `eq`.
pub fn g_lambda(theta: f64, v: f64, lambda: f64, eq: &Equilibrium) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(OrbitSpectrum::new(&eq.pendulum(), theta, v)?.g(lambda))
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(HmfError::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }
    Ok(())
}

/// Precomputed quadrature for repeated evaluations of `G(λ)`.
pub struct DispersionEvaluator {
    base: f64,
    terms: Vec<(f64, OrbitSpectrum)>,
}

impl DispersionEvaluator {
    pub fn new(eq: &Equilibrium) -> Result<Self> {
        Self::with_quadrature(eq, DEFAULT_QUADRATURE)
    }

    pub fn with_quadrature(eq: &Equilibrium, shape: (usize, usize)) -> Result<Self> {
        let q = PhaseQuadrature::new(eq.m0, &eq.profile, shape.0, shape.1)?;
        let pend = eq.pendulum();
        let fft = shared_fft();
        let active: Vec<_> = q
            .nodes()
            .iter()
            .filter(|n| eq.profile.derivative(n.e0) != 0.0)
            .collect();
        let cos2: Vec<f64> = active
            .iter()
            .map(|n| n.weight * eq.profile.derivative(n.e0) * n.theta.cos().powi(2))
            .collect();
        let base = 1.0 + pairwise_sum(&cos2);
        let terms = active
            .par_iter()
            .map(|n| {
                let w = n.weight * eq.profile.derivative(n.e0) * n.theta.cos();
                Ok((w, OrbitSpectrum::with_fft(&pend, n.theta, n.v, &fft)?))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { base, terms })
    }

    /// `G(λ) = 1 + ∬ F' cos² θ - ∬ F' g_λ cos θ`.
    pub fn evaluate(&self, lambda: f64) -> f64 {
        let parts: Vec<f64> = self
            .terms
            .par_iter()
            .map(|(w, s)| w * s.g(lambda))
            .collect();
        self.base - pairwise_sum(&parts)
    }

    /// `G(0+)` by two rounds of Richardson extrapolation from
    /// `λ = 1e-2, 5e-3, 2.5e-3`; `G` is smooth in `λ` down to 0.
    pub fn small_lambda_limit(&self) -> f64 {
        let (g1, g2, g3) = (
            self.evaluate(1e-2),
            self.evaluate(5e-3),
            self.evaluate(2.5e-3),
        );
        let (r1, r2) = (2.0 * g2 - g1, 2.0 * g3 - g2);
        (4.0 * r2 - r1) / 3.0
    }

    pub fn scan(&self, lambdas: &[f64]) -> Vec<DispersionSample> {
        lambdas
            .iter()
            .map(|&lambda| DispersionSample {
                lambda,
                g: self.evaluate(lambda),
            })
            .collect()
    }
}

/// `G(λ)` at a single point. Prefer [`DispersionEvaluator`] for scans.
pub fn dispersion_g(lambda: f64, eq: &Equilibrium) -> Result<f64> {
    check_lambda(lambda)?;
    Ok(DispersionEvaluator::new(eq)?.evaluate(lambda))
}

/// A certified root of `G` with the bracket that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GrowthRate {
    pub lambda_star: f64,
    pub residual: f64,
    pub lambda_lo: f64,
    pub lambda_hi: f64,
    pub g_lo: f64,
    pub g_hi: f64,
}

/// `n` logarithmically spaced values ending at `hi`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![hi];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..n)
        .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
        .collect()
}

/// Default upper end of the root search, `10 √m0`.
pub fn default_lambda_max(eq: &Equilibrium) -> f64 {
    10.0 * eq.m0.sqrt()
}

pub fn find_growth_rate(eq: &Equilibrium, lambda_max: f64) -> Result<Option<GrowthRate>> {
    let eval = DispersionEvaluator::new(eq)?;
    find_growth_rate_with(&eval, lambda_max)
}

/// Scans `G` on a logarithmic grid of `(1e-3, lambda_max]` and bisects the
/// largest bracket with `G(lo) < 0 < G(hi)`.
pub fn find_growth_rate_with(
    eval: &DispersionEvaluator,
    lambda_max: f64,
) -> Result<Option<GrowthRate>> {
    check_lambda(lambda_max)?;
    let lo_end = ROOT_SCAN_MIN.min(0.5 * lambda_max);
    let samples = eval.scan(&log_space(lo_end, lambda_max, ROOT_SCAN_SAMPLES));
    let Some(k) = samples
        .windows(2)
        .rposition(|w| w[0].g < 0.0 && w[1].g > 0.0)
    else {
        return Ok(None);
    };
    let (mut lo, mut hi) = (samples[k], samples[k + 1]);
    let (lambda_lo, lambda_hi, g_lo, g_hi) = (lo.lambda, hi.lambda, lo.g, hi.g);
    let mut best = if lo.g.abs() < hi.g.abs() { lo } else { hi };
    for _ in 0..200 {
        if best.g.abs() <= 1e-3 * ROOT_TOLERANCE {
            break;
        }
        let mid = 0.5 * (lo.lambda + hi.lambda);
        if mid <= lo.lambda || mid >= hi.lambda {
            break;
        }
        let s = DispersionSample {
            lambda: mid,
            g: eval.evaluate(mid),
        };
        if s.g.abs() < best.g.abs() {
            best = s;
        }
        if s.g < 0.0 {
            lo = s;
        } else {
            hi = s;
        }
    }
    if best.g.abs() > ROOT_TOLERANCE {
        return Err(HmfError::NotARoot {
            lambda: best.lambda,
            residual: best.g.abs(),
            tolerance: ROOT_TOLERANCE,
        });
    }
    Ok(Some(GrowthRate {
        lambda_star: best.lambda,
        residual: best.g.abs(),
        lambda_lo,
        lambda_hi,
        g_lo,
        g_hi,
    }))
}

/// Gridded unstable eigenfunction `f = F'(e0) (g_λ - cos θ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Eigenmode {
    pub lambda_star: f64,
    pub grid: PhaseSpaceGrid,
    /// `∫ ρ_f cos θ dθ` by the phase-space quadrature.
    pub normalization: f64,
    /// The same moment by the rectangle rule on the grid.
    pub grid_normalization: f64,
}

/// Grid layout of an eigenmode or simulation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridShape {
    pub n_theta: usize,
    pub n_v: usize,
    pub v_max: f64,
}

pub fn eigenmode(eq: &Equilibrium, lambda_star: f64, shape: GridShape) -> Result<Eigenmode> {
    let eval = DispersionEvaluator::new(eq)?;
    eigenmode_with(eq, &eval, lambda_star, shape)
}

pub fn eigenmode_with(
    eq: &Equilibrium,
    eval: &DispersionEvaluator,
    lambda_star: f64,
    shape: GridShape,
) -> Result<Eigenmode> {
    check_lambda(lambda_star)?;
    let g_star = eval.evaluate(lambda_star);
    if g_star.abs() > EIGENMODE_ROOT_TOLERANCE {
        return Err(HmfError::NotARoot {
            lambda: lambda_star,
            residual: g_star.abs(),
            tolerance: EIGENMODE_ROOT_TOLERANCE,
        });
    }
    let mut grid = PhaseSpaceGrid::zeros(shape.n_theta, shape.n_v, shape.v_max)?;
    let pend = eq.pendulum();
    let fft = shared_fft();
    let (nt, nv) = (grid.n_theta, grid.n_v);
    // Independent nodes: θ in [0, π] and, on the self-mirrored rows, v ≤ 0.
    let mut todo = Vec::new();
    for i in 0..=nt / 2 {
        let self_mirror = grid.mirror(i, 0).0 == i;
        for j in 0..nv {
            if self_mirror && j > (nv - 1) / 2 {
                continue;
            }
            todo.push((i, j));
        }
    }
    let m0 = eq.m0;
    let values = todo
        .par_iter()
        .map(|&(i, j)| {
            let (theta, v) = (grid.theta(i), grid.v(j));
            let e0 = 0.5 * v * v - m0 * theta.cos();
            let slope = eq.profile.derivative(e0);
            if slope == 0.0 {
                return Ok(0.0);
            }
            let g = OrbitSpectrum::with_fft(&pend, theta, v, &fft)?.g(lambda_star);
            Ok(slope * (g - theta.cos()))
        })
        .collect::<Result<Vec<f64>>>()?;
    for (&(i, j), &x) in todo.iter().zip(&values) {
        let (mi, mj) = grid.mirror(i, j);
        grid.values[i * nv + j] = x;
        grid.values[mi * nv + mj] = x;
    }
    let grid_normalization = cos_moment(&grid);
    Ok(Eigenmode {
        lambda_star,
        grid,
        normalization: 1.0 - g_star,
        grid_normalization,
    })
}

/// `∬ f cos θ` on the grid.
pub fn cos_moment(grid: &PhaseSpaceGrid) -> f64 {
    moment(grid, f64::cos)
}

/// `∬ f sin θ` on the grid.
pub fn sin_moment(grid: &PhaseSpaceGrid) -> f64 {
    moment(grid, f64::sin)
}

fn moment(grid: &PhaseSpaceGrid, u: fn(f64) -> f64) -> f64 {
    let rows: Vec<f64> = (0..grid.n_theta)
        .map(|i| u(grid.theta(i)) * pairwise_sum(grid.row(i)))
        .collect();
    pairwise_sum(&rows) * grid.cell()
}

/// Amplitude and cutoff of the truncated perturbation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationSpec {
    pub delta: f64,
    pub alpha: f64,
    pub chi_width: f64,
}

impl PerturbationSpec {
    /// Width `δ^{1/(2α)}`.
    pub fn new(delta: f64, alpha: f64) -> Result<Self> {
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(HmfError::InvalidArgument(format!(
                "delta must be nonnegative, got {delta}"
            )));
        }
        if !(alpha.is_finite() && alpha >= 1.0) {
            return Err(HmfError::InvalidArgument(format!(
                "alpha must be at least 1, got {alpha}"
            )));
        }
        Ok(Self {
            delta,
            alpha,
            chi_width: delta.powf(1.0 / (2.0 * alpha)),
        })
    }
}

/// Cutoff `χ(t) = S(t^α)` on `[0, 1]`, 0 below and 1 above. Since the smooth
/// step satisfies `S(u) ≤ 2u`, `χ(t) ≤ 2 t^α`.
pub fn chi(t: f64, alpha: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else if t >= 1.0 {
        1.0
    } else {
        smooth_step(t.powf(alpha))
    }
}

/// `χ_δ(e) = χ((e_star - e) / δ^{1/(2α)})`.
pub fn chi_delta(e: f64, spec: &PerturbationSpec, e_star: f64) -> f64 {
    if spec.chi_width == 0.0 {
        return if e < e_star { 1.0 } else { 0.0 };
    }
    chi((e_star - e) / spec.chi_width, spec.alpha)
}

/// `f0` sampled on `shape`.
pub fn equilibrium_grid(eq: &Equilibrium, shape: GridShape) -> Result<PhaseSpaceGrid> {
    PhaseSpaceGrid::from_fn(shape.n_theta, shape.n_v, shape.v_max, |t, v| {
        eq.density(t, v)
    })
}

/// `f0 + δ ĝ χ_δ(e0)` where `ĝ` is the mode scaled to unit grid L¹ norm.
/// Every node is checked for nonnegativity.
pub fn build_perturbed_initial(
    eq: &Equilibrium,
    mode: &Eigenmode,
    spec: &PerturbationSpec,
) -> Result<PhaseSpaceGrid> {
    let g = &mode.grid;
    let shape = GridShape {
        n_theta: g.n_theta,
        n_v: g.n_v,
        v_max: g.v_max,
    };
    let mut out = equilibrium_grid(eq, shape)?;
    if spec.delta == 0.0 {
        return Ok(out);
    }
    let norm = g.l1_norm();
    if !(norm > 0.0) {
        return Err(HmfError::InvalidArgument(
            "eigenmode grid is identically zero".into(),
        ));
    }
    let scale = spec.delta / norm;
    for i in 0..g.n_theta {
        let c = g.theta(i).cos();
        for j in 0..g.n_v {
            let v = g.v(j);
            let e0 = 0.5 * v * v - eq.m0 * c;
            let k = i * g.n_v + j;
            let value =
                out.values[k] + scale * g.values[k] * chi_delta(e0, spec, eq.profile.e_star);
            if value < 0.0 {
                return Err(HmfError::DeltaTooLarge {
                    i_theta: i,
                    i_v: j,
                    value,
                });
            }
            out.values[k] = value;
        }
    }
    Ok(out)
}
