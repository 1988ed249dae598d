//! Characteristic flow of the steady potential `phi0(theta) = -m0 cos(theta)`.
//!
//! The characteristics are pendulum trajectories. This module classifies
//! them by energy, integrates them, and evaluates periods and orbit averages
//! with quadratures that stay accurate up to the separatrix band.

use std::collections::HashMap;
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI, TAU};
use std::sync::{OnceLock, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{HmfError, Result};
use crate::quadrature::GaussLegendre;

/// Relative half-width of the energy band around `m0` treated as the separatrix.
pub const SEPARATRIX_TOLERANCE: f64 = 1e-9;
/// Relative tolerance for classifying a point as the bottom of the well.
pub const FIXED_POINT_TOLERANCE: f64 = 1e-12;
/// Minimum number of integrator steps per characteristic period.
pub const STEPS_PER_PERIOD: f64 = 256.0;

const PERIOD_CACHE_QUANTUM: f64 = 1e-12;

/// A point of the phase space, angle reduced to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhasePoint {
    pub theta: f64,
    pub v: f64,
}

impl PhasePoint {
    pub fn new(theta: f64, v: f64) -> Self {
        Self {
            theta: wrap_angle(theta),
            v,
        }
    }
}

/// Reduces an angle to `[0, 2π)`.
pub fn wrap_angle(theta: f64) -> f64 {
    let r = theta.rem_euclid(TAU);
    if r >= TAU {
        0.0
    } else {
        r
    }
}

/// Signed distance between two angles, in `(-π, π]`.
pub fn angle_difference(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(TAU);
    if d > PI {
        d - TAU
    } else {
        d
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    FixedPoint,
    Librating,
    Rotating,
    Separatrix,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Orbit {
    pub e0: f64,
    pub regime: Regime,
    pub period: Option<f64>,
    pub theta_turn: Option<f64>,
}

/// Pendulum flow for a given magnetization `m0`, with a period cache.
#[derive(Debug)]
pub struct Pendulum {
    m0: f64,
    periods: RwLock<HashMap<i64, f64>>,
}

impl Clone for Pendulum {
    fn clone(&self) -> Self {
        Self::new(self.m0).expect("m0 validated at construction")
    }
}

impl Pendulum {
    pub fn new(m0: f64) -> Result<Self> {
        if !(m0.is_finite() && m0 > 0.0) {
            return Err(HmfError::InvalidArgument(format!(
                "magnetization must be positive and finite, got {m0}"
            )));
        }
        Ok(Self {
            m0,
            periods: RwLock::new(HashMap::new()),
        })
    }

    pub fn m0(&self) -> f64 {
        self.m0
    }

    /// `v²/2 - m0 cos θ`.
    pub fn energy(&self, p: PhasePoint) -> f64 {
        energy(p.theta, p.v, self.m0)
    }

    pub fn is_separatrix(&self, e0: f64) -> bool {
        (e0 - self.m0).abs() <= SEPARATRIX_TOLERANCE * self.m0
    }

    fn is_fixed_point(&self, e0: f64) -> bool {
        e0 + self.m0 <= FIXED_POINT_TOLERANCE * self.m0
    }

    pub fn regime(&self, e0: f64) -> Regime {
        if self.is_fixed_point(e0) {
            Regime::FixedPoint
        } else if self.is_separatrix(e0) {
            Regime::Separatrix
        } else if e0 < self.m0 {
            Regime::Librating
        } else {
            Regime::Rotating
        }
    }

    pub fn classify(&self, p: PhasePoint) -> Orbit {
        let e0 = self.energy(p);
        let regime = self.regime(e0);
        let period = match regime {
            Regime::Librating | Regime::Rotating => self.period(e0).ok(),
            _ => None,
        };
        let theta_turn = (regime == Regime::Librating).then(|| (-e0 / self.m0).acos());
        Orbit {
            e0,
            regime,
            period,
            theta_turn,
        }
    }

    /// Upper bound of `|V(s)|` along the trajectory through `(θ, v)`.
    fn speed_bound(&self, theta: f64, v: f64) -> f64 {
        (v * v + 2.0 * self.m0 * (1.0 + theta.cos())).sqrt()
    }

    fn max_step(&self, theta: f64, v: f64) -> f64 {
        let omega = self.m0.sqrt().max(self.speed_bound(theta, v));
        TAU / (STEPS_PER_PERIOD * omega)
    }

    /// Flow map over time `s` (negative runs backward), angle not reduced.
    pub fn flow(&self, theta: f64, v: f64, s: f64) -> (f64, f64) {
        if s == 0.0 {
            return (theta, v);
        }
        let h_max = self.max_step(theta, v);
        let n = (s.abs() / h_max).ceil().max(1.0) as usize;
        let h = s / n as f64;
        let mut state = (theta, v);
        for _ in 0..n {
            state = yoshida8_step(state.0, state.1, h, self.m0);
        }
        state
    }

    pub fn advance(&self, p: PhasePoint, s: f64) -> PhasePoint {
        let (theta, v) = self.flow(p.theta, p.v, s);
        PhasePoint::new(theta, v)
    }

    /// Samples `(Θ, V)` at `n` equally spaced times `0, dt, …, (n-1) dt`.
    pub fn sample_trajectory(&self, theta: f64, v: f64, dt: f64, n: usize) -> Vec<(f64, f64)> {
        let h_max = self.max_step(theta, v);
        let sub = (dt.abs() / h_max).ceil().max(1.0) as usize;
        let h = dt / sub as f64;
        let mut out = Vec::with_capacity(n);
        let mut state = (theta, v);
        for k in 0..n {
            if k > 0 {
                for _ in 0..sub {
                    state = yoshida8_step(state.0, state.1, h, self.m0);
                }
            }
            out.push(state);
        }
        out
    }

    /// Period of the characteristic of energy `e0`, cached by quantized energy.
    pub fn period(&self, e0: f64) -> Result<f64> {
        let key = (e0 / (PERIOD_CACHE_QUANTUM * self.m0)).round();
        let cacheable = key.abs() < i64::MAX as f64;
        if cacheable {
            if let Some(&t) = self
                .periods
                .read()
                .expect("period cache")
                .get(&(key as i64))
            {
                return Ok(t);
            }
        }
        let t = self.period_uncached(e0)?;
        if cacheable {
            self.periods
                .write()
                .expect("period cache")
                .insert(key as i64, t);
        }
        Ok(t)
    }

    pub fn period_uncached(&self, e0: f64) -> Result<f64> {
        let m = self.m0;
        match self.shell(e0)? {
            Shell::Point => Ok(TAU / m.sqrt()),
            Shell::Librating { k, kp } => {
                Ok(4.0 / m.sqrt() * kernel_integral(k, kp, |_, _, _| 1.0))
            }
            Shell::Rotating { k, kp } => Ok(2.0 * std::f64::consts::SQRT_2 / (e0 + m).sqrt()
                * kernel_integral(k, kp, |_, _, _| 1.0)),
        }
    }

    fn shell(&self, e0: f64) -> Result<Shell> {
        let m = self.m0;
        if !e0.is_finite() {
            return Err(HmfError::InvalidArgument(format!(
                "energy {e0} is not finite"
            )));
        }
        if self.is_separatrix(e0) {
            return Err(HmfError::PeriodDiverges { e0, m0: m });
        }
        if e0 + m < -FIXED_POINT_TOLERANCE * m {
            return Err(HmfError::NoOrbit { e0, m0: m });
        }
        if e0 + m <= 0.0 {
            return Ok(Shell::Point);
        }
        if e0 < m {
            let k2 = (m + e0) / (2.0 * m);
            let kp2 = (m - e0) / (2.0 * m);
            Ok(Shell::Librating {
                k: k2.sqrt(),
                kp: kp2.sqrt(),
            })
        } else {
            let k2 = 2.0 * m / (e0 + m);
            let kp2 = (e0 - m) / (e0 + m);
            Ok(Shell::Rotating {
                k: k2.sqrt(),
                kp: kp2.sqrt(),
            })
        }
    }

    /// `∫_{D_e} h(θ) (e0 + m0 cos θ)^{-1/2} dθ` over the accessible arc
    /// `D_e = {θ : m0 cos θ > -e0}`.
    pub fn shell_integral(&self, e0: f64, h: impl Fn(f64) -> f64) -> Result<f64> {
        let m = self.m0;
        match self.shell(e0)? {
            Shell::Point => Err(HmfError::NoOrbit { e0, m0: m }),
            Shell::Librating { k, kp } => {
                let sum = kernel_integral(k, kp, |s, _, delta| {
                    let theta = 2.0 * (k * s).atan2(delta);
                    h(theta) + h(-theta)
                });
                Ok((2.0 / m).sqrt() * sum)
            }
            Shell::Rotating { k, kp } => {
                let sum = kernel_integral(k, kp, |s, c, _| {
                    let theta = 2.0 * s.atan2(c);
                    h(theta) + h(-theta)
                });
                Ok(2.0 / (e0 + m).sqrt() * sum)
            }
        }
    }

    /// Orbit average `(Π_{m0} h)(e0)`: the `(e0 + m0 cos θ)^{-1/2}`-weighted
    /// mean of `h` over the accessible arc.
    pub fn orbit_average(&self, e0: f64, h: impl Fn(f64) -> f64) -> Result<f64> {
        if let Shell::Point = self.shell(e0)? {
            return Ok(h(0.0));
        }
        let num = self.shell_integral(e0, &h)?;
        let den = self.shell_integral(e0, |_| 1.0)?;
        Ok(num / den)
    }
}

#[derive(Debug, Clone, Copy)]
enum Shell {
    Point,
    Librating { k: f64, kp: f64 },
    Rotating { k: f64, kp: f64 },
}

pub fn energy(theta: f64, v: f64, m0: f64) -> f64 {
    0.5 * v * v - m0 * theta.cos()
}

// Eighth-order symmetric composition of the leapfrog scheme (15 stages).
const YOSHIDA8: [f64; 15] = {
    const W1: f64 = -1.615_823_741_500_97;
    const W2: f64 = -2.446_991_823_705_24;
    const W3: f64 = -0.007_169_894_197_081_20;
    const W4: f64 = 2.440_027_326_167_35;
    const W5: f64 = 0.157_739_928_123_617;
    const W6: f64 = 1.820_206_309_707_14;
    const W7: f64 = 1.042_426_208_699_91;
    const W0: f64 = 1.0 - 2.0 * (W1 + W2 + W3 + W4 + W5 + W6 + W7);
    [W7, W6, W5, W4, W3, W2, W1, W0, W1, W2, W3, W4, W5, W6, W7]
};

#[inline]
fn yoshida8_step(mut theta: f64, mut v: f64, h: f64, m0: f64) -> (f64, f64) {
    let mut acc = -m0 * theta.sin();
    for &c in &YOSHIDA8 {
        let ch = c * h;
        v += 0.5 * ch * acc;
        theta += ch * v;
        acc = -m0 * theta.sin();
        v += 0.5 * ch * acc;
    }
    (theta, v)
}

struct KernelRules {
    plain: GaussLegendre,
    outer: GaussLegendre,
    panel: GaussLegendre,
}

fn rules() -> &'static KernelRules {
    static RULES: OnceLock<KernelRules> = OnceLock::new();
    RULES.get_or_init(|| KernelRules {
        plain: GaussLegendre::new(64),
        outer: GaussLegendre::new(48),
        panel: GaussLegendre::new(32),
    })
}

/// `∫_0^{π/2} H(sin φ, cos φ, Δ) / Δ dφ` with `Δ = sqrt(1 - k² sin² φ)`.
///
/// Near `k = 1` the weight peaks at `φ = π/2` with width `k'`. On
/// `φ ∈ [π/4, π/2]` the substitution `cos φ = (k'/k) sinh w` turns
/// `Δ` into `k' cosh w` and leaves an analytic integrand.
fn kernel_integral(k: f64, kp: f64, mut h: impl FnMut(f64, f64, f64) -> f64) -> f64 {
    let r = rules();
    let delta_of = |s: f64, c: f64| (c * c + kp * kp * s * s).sqrt();
    if k < 0.7 {
        let mut terms = Vec::with_capacity(r.plain.len());
        for (phi, w) in r.plain.mapped(0.0, FRAC_PI_2) {
            let (s, c) = phi.sin_cos();
            let d = delta_of(s, c);
            terms.push(w * h(s, c, d) / d);
        }
        return crate::quadrature::pairwise_sum(&terms);
    }
    let mut terms = Vec::with_capacity(r.outer.len() + 16 * r.panel.len());
    for (phi, w) in r.outer.mapped(0.0, FRAC_PI_4) {
        let (s, c) = phi.sin_cos();
        let d = delta_of(s, c);
        terms.push(w * h(s, c, d) / d);
    }
    let w_max = (k / kp * FRAC_PI_4.sin()).asinh();
    let n_panels = (w_max / 1.25).ceil().max(1.0) as usize;
    let width = w_max / n_panels as f64;
    for p in 0..n_panels {
        let a = p as f64 * width;
        for (w, wt) in r.panel.mapped(a, a + width) {
            // φ = π/2 - t with sin t = (k'/k) sinh w.
            let sin_t = kp / k * w.sinh();
            let cos_t = (1.0 - sin_t * sin_t).sqrt();
            let d = kp * w.cosh();
            terms.push(wt * h(cos_t, sin_t, d) / (k * cos_t));
        }
    }
    crate::quadrature::pairwise_sum(&terms)
}
