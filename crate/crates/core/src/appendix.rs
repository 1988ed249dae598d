//! Energy-shell integrals behind the existence argument for unstable states.
//!
//! With weight `w(θ) = (e + m cos θ)^{-1/2}` on `D_e = {m cos θ > -e}`:
//! `α = ∫ w`, `β = ∫ w sin² θ`, `I = ∫ (e + m cos θ)^{1/2}` and
//! `g_m = Π cos² - (Π cos)² - Π sin²`.

use std::f64::consts::FRAC_PI_2;

use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::pendulum::Pendulum;
use crate::quadrature::GaussLegendre;

/// `α(e)`; diverges at the separatrix, which is an error.
pub fn alpha_e(e: f64, m: f64) -> Result<f64> {
    Pendulum::new(m)?.shell_integral(e, |_| 1.0)
}

/// `β(e)`; finite at the separatrix, where it is evaluated in closed form.
pub fn beta_e(e: f64, m: f64) -> Result<f64> {
    let p = Pendulum::new(m)?;
    if p.is_separatrix(e) {
        // θ = 2ψ, e + m cos θ = 2m cos² ψ, sin² θ = 4 sin² ψ cos² ψ.
        return Ok(separatrix_integral(|s, c| {
            4.0 * s * s * c * c / ((2.0 * m).sqrt() * c)
        }));
    }
    p.shell_integral(e, |t| t.sin().powi(2))
}

/// `I(e) = ∫_{D_e} (e + m cos θ)^{1/2} dθ`; finite at the separatrix.
pub fn sqrt_weight_integral(e: f64, m: f64) -> Result<f64> {
    let p = Pendulum::new(m)?;
    if p.is_separatrix(e) {
        return Ok(separatrix_integral(|_, c| (2.0 * m).sqrt() * c));
    }
    p.shell_integral(e, |t| e + m * t.cos())
}

/// `g_m(e)`; the separatrix band is an error.
pub fn g_m(e: f64, m: f64) -> Result<f64> {
    Ok(alpha_g_m(e, m)? / alpha_e(e, m)?)
}

/// `α(e) g_m(e)`, assembled from shell integrals without dividing through.
pub fn alpha_g_m(e: f64, m: f64) -> Result<f64> {
    let p = Pendulum::new(m)?;
    let a = p.shell_integral(e, |_| 1.0)?;
    let c1 = p.shell_integral(e, f64::cos)?;
    // cos² - sin² = cos 2θ.
    let c2s2 = p.shell_integral(e, |t| (2.0 * t).cos())?;
    Ok(c2s2 - c1 * c1 / a)
}

/// `∫_{-π}^{π} h(sin ψ, cos ψ) dθ` with `θ = 2ψ`.
fn separatrix_integral(h: impl Fn(f64, f64) -> f64) -> f64 {
    let rule = GaussLegendre::new(64);
    2.0 * rule.integrate(-FRAC_PI_2, FRAC_PI_2, |psi| {
        let (s, c) = psi.sin_cos();
        h(s, c)
    })
}

/// Energies `1 - 10^{-k}`, `k = 5..=8`, used to extrapolate `α g_1` to the
/// separatrix.
pub const LIMIT_ENERGIES: [f64; 4] = [1.0 - 1e-5, 1.0 - 1e-6, 1.0 - 1e-7, 1.0 - 1e-8];

/// `α g_1 → 8√2/3` as `e → 1⁻`.
pub fn alpha_g_limit_constant() -> f64 {
    8.0 * std::f64::consts::SQRT_2 / 3.0
}

/// Separatrix limit of `α(e) g_1(e)`, from a least-squares fit of
/// `c + d / α(e)` over [`LIMIT_ENERGIES`]. The `1/α` term is the slowly
/// decaying `-I²/α` part. Returns `(c, d)`.
pub fn alpha_g_limit() -> Result<(f64, f64)> {
    let mut pts = Vec::with_capacity(LIMIT_ENERGIES.len());
    for &e in &LIMIT_ENERGIES {
        pts.push((1.0 / alpha_e(e, 1.0)?, alpha_g_m(e, 1.0)?));
    }
    let n = pts.len() as f64;
    let xm = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let ym = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - xm) * (p.1 - ym)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - xm) * (p.0 - xm)).sum();
    let d = sxy / sxx;
    Ok((ym - d * xm, d))
}

/// One line of the appendix check table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AppendixCheck {
    pub name: String,
    pub value: f64,
    pub expected: f64,
    /// `|value - expected|`, divided by `|expected|` when `relative`.
    pub error: f64,
    pub tolerance: f64,
    pub relative: bool,
    pub pass: bool,
}

impl AppendixCheck {
    fn new(name: &str, value: f64, expected: f64, tolerance: f64, relative: bool) -> Self {
        let mut error = (value - expected).abs();
        if relative {
            error /= expected.abs();
        }
        Self {
            name: name.to_string(),
            value,
            expected,
            error,
            tolerance,
            relative,
            pass: error <= tolerance,
        }
    }
}

/// The appendix constants at `m = 1`.
pub fn check_table() -> Result<Vec<AppendixCheck>> {
    let s2 = std::f64::consts::SQRT_2;
    let e = 1.0 - 1e-8;
    let log_ratio = alpha_e(e, 1.0)? / (-s2 * (1.0 - e).ln());
    let (c, _) = alpha_g_limit()?;
    Ok(vec![
        AppendixCheck::new(
            "I(1) = 4 sqrt 2",
            sqrt_weight_integral(1.0, 1.0)?,
            4.0 * s2,
            1e-10,
            false,
        ),
        AppendixCheck::new(
            "beta(1) = 8 sqrt 2 / 3",
            beta_e(1.0, 1.0)?,
            8.0 * s2 / 3.0,
            1e-8,
            false,
        ),
        AppendixCheck::new(
            "alpha(e) / (-sqrt 2 ln(1 - e)), e = 1 - 1e-8",
            log_ratio,
            1.0,
            2e-2,
            true,
        ),
        AppendixCheck::new(
            "lim alpha g_1 = 8 sqrt 2 / 3",
            c,
            alpha_g_limit_constant(),
            1e-3,
            true,
        ),
    ])
}
