//! Self-consistent steady states `f0 = F(v²/2 - m0 cos θ)` and the
//! instability criterion κ.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HmfError, Result};
use crate::pendulum::Pendulum;
use crate::profile::Profile;
use crate::quadrature::{pairwise_sum, panels, GaussLegendre};

/// Default node counts of the phase-space quadrature.
pub const DEFAULT_QUADRATURE: (usize, usize) = (256, 256);

/// Required bound on `|γ(m0, F) - m0|`.
pub const RESIDUAL_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Equilibrium {
    pub m0: f64,
    pub residual: f64,
    #[serde(flatten)]
    pub profile: Profile,
}

impl Equilibrium {
    /// `f0(θ, v)`.
    pub fn density(&self, theta: f64, v: f64) -> f64 {
        self.profile.value(0.5 * v * v - self.m0 * theta.cos())
    }

    pub fn pendulum(&self) -> Pendulum {
        Pendulum::new(self.m0).expect("equilibrium m0 is positive")
    }

    /// Largest speed inside the support of `f0`.
    pub fn support_speed(&self) -> f64 {
        (2.0 * (self.profile.e_star + self.m0)).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhaseNode {
    pub theta: f64,
    pub v: f64,
    pub weight: f64,
    pub e0: f64,
}

/// Tensor Gauss–Legendre rule over `{v²/2 - m cos θ < e_star}` for integrands
/// that are even under `(θ, v) ↦ (-θ, -v)`.
///
/// Only `θ ≥ 0` is stored, with doubled weights. Panels in θ and in v are cut
/// where the energy crosses a profile breakpoint, so each panel sees a smooth
/// integrand.
#[derive(Debug, Clone)]
pub struct PhaseQuadrature {
    m: f64,
    nodes: Vec<PhaseNode>,
}

impl PhaseQuadrature {
    /// `n_theta` and `n_v` count nodes over the full θ and v ranges.
    pub fn new(m: f64, profile: &Profile, n_theta: usize, n_v: usize) -> Result<Self> {
        if !(m.is_finite() && m > 0.0) {
            return Err(HmfError::InvalidArgument(format!(
                "magnetization must be positive, got {m}"
            )));
        }
        if n_theta < 8 || n_v < 8 {
            return Err(HmfError::InvalidArgument(format!(
                "quadrature needs at least 8x8 nodes, got {n_theta}x{n_v}"
            )));
        }
        let e_star = profile.e_star;
        let mut nodes = Vec::new();
        if e_star <= -m {
            return Ok(Self { m, nodes });
        }
        let breaks = profile.breakpoints();
        let theta_max = if e_star >= m {
            PI
        } else {
            (-e_star / m).acos()
        };
        let theta_breaks: Vec<f64> = breaks
            .iter()
            .filter(|&&e| e > -m && e < m)
            .map(|&e| (-e / m).acos())
            .collect();
        let theta_panels = panels(0.0, theta_max, &theta_breaks);
        let theta_counts = split_count(n_theta / 2, theta_panels.len());
        for (&(a, b), &count) in theta_panels.iter().zip(&theta_counts) {
            let rule = GaussLegendre::new(count);
            for (theta, wt) in rule.mapped(a, b) {
                let c = theta.cos();
                let v_top = (2.0 * (e_star + m * c)).max(0.0).sqrt();
                let v_breaks: Vec<f64> = breaks
                    .iter()
                    .map(|&e| 2.0 * (e + m * c))
                    .filter(|&x| x > 0.0)
                    .map(f64::sqrt)
                    .collect();
                let v_panels = panels(0.0, v_top, &v_breaks);
                let v_counts = split_count(n_v / 2, v_panels.len());
                for (&(va, vb), &vc) in v_panels.iter().zip(&v_counts) {
                    let vrule = GaussLegendre::new(vc);
                    for (v, wv) in vrule.mapped(va, vb) {
                        let e0 = 0.5 * v * v - m * c;
                        let weight = 2.0 * wt * wv;
                        nodes.push(PhaseNode {
                            theta,
                            v,
                            weight,
                            e0,
                        });
                        nodes.push(PhaseNode {
                            theta,
                            v: -v,
                            weight,
                            e0,
                        });
                    }
                }
            }
        }
        Ok(Self { m, nodes })
    }

    pub fn m(&self) -> f64 {
        self.m
    }

    pub fn nodes(&self) -> &[PhaseNode] {
        &self.nodes
    }

    /// `∬ h` over the support, summed in a fixed order.
    pub fn integrate<H>(&self, h: H) -> f64
    where
        H: Fn(&PhaseNode) -> f64 + Sync,
    {
        let terms: Vec<f64> = self.nodes.par_iter().map(|n| n.weight * h(n)).collect();
        pairwise_sum(&terms)
    }
}

fn split_count(total: usize, parts: usize) -> Vec<usize> {
    let base = (total / parts).max(4);
    let extra = total.saturating_sub(base * parts);
    (0..parts).map(|i| base + usize::from(i < extra)).collect()
}

/// `γ(m, F) = ∬ F(v²/2 - m cos θ) cos θ dθ dv`.
pub fn gamma(m: f64, profile: &Profile) -> Result<f64> {
    gamma_with(m, profile, DEFAULT_QUADRATURE)
}

pub fn gamma_with(m: f64, profile: &Profile, shape: (usize, usize)) -> Result<f64> {
    let q = PhaseQuadrature::new(m, profile, shape.0, shape.1)?;
    Ok(q.integrate(|n| profile.value(n.e0) * n.theta.cos()))
}

/// Rescales the amplitude of `shape` so that `γ(m0, F) = m0` at the midpoint
/// `m0` of `m_bracket`. Since γ is linear in `F`, the rescaling is exact.
pub fn solve_self_consistency(shape: &Profile, m_bracket: (f64, f64)) -> Result<Equilibrium> {
    shape.validate()?;
    let (lo, hi) = m_bracket;
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
        return Err(HmfError::InvalidArgument(format!(
            "bracket must be positive and ordered, got [{lo}, {hi}]"
        )));
    }
    let m0 = 0.5 * (lo + hi);
    if shape.e_star >= m0 {
        return Err(HmfError::CutoffAboveSeparatrix {
            e_star: shape.e_star,
            m0,
        });
    }
    let g = gamma(m0, shape)?;
    if !(g > 0.0) {
        return Err(HmfError::ShapeCannotMagnetize { m0, gamma: g });
    }
    let profile = shape.with_amplitude(shape.amplitude * m0 / g);
    let residual = (gamma(m0, &profile)? - m0).abs();
    if residual > RESIDUAL_TOLERANCE {
        return Err(HmfError::InvalidArgument(format!(
            "self-consistency residual {residual} exceeds {RESIDUAL_TOLERANCE}"
        )));
    }
    Ok(Equilibrium {
        m0,
        residual,
        profile,
    })
}

/// `κ0 = -∬ F'(e0) (cos θ - Π cos θ)²`.
pub fn kappa(eq: &Equilibrium) -> Result<f64> {
    kappa_with(eq, DEFAULT_QUADRATURE)
}

pub fn kappa_with(eq: &Equilibrium, shape: (usize, usize)) -> Result<f64> {
    let q = PhaseQuadrature::new(eq.m0, &eq.profile, shape.0, shape.1)?;
    let pend = eq.pendulum();
    let pi_cos = orbit_cosines(&q, &pend, &eq.profile)?;
    let terms: Vec<f64> = q
        .nodes()
        .par_iter()
        .zip(&pi_cos)
        .map(|(n, &pc)| {
            let d = n.theta.cos() - pc;
            -n.weight * eq.profile.derivative(n.e0) * d * d
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// `Π cos θ` at every node where `F'` does not vanish (zero elsewhere).
pub(crate) fn orbit_cosines(
    q: &PhaseQuadrature,
    pend: &Pendulum,
    profile: &Profile,
) -> Result<Vec<f64>> {
    q.nodes()
        .par_iter()
        .map(|n| {
            if profile.derivative(n.e0) == 0.0 || pend.is_separatrix(n.e0) {
                Ok(0.0)
            } else {
                pend.orbit_average(n.e0, f64::cos)
            }
        })
        .collect()
}

/// Builds every (shape, m) equilibrium that exists and ranks them by κ,
/// largest first. Pairs that cannot be equilibrated are skipped.
pub fn search_unstable(shapes: &[Profile], ms: &[f64]) -> Vec<(Equilibrium, f64)> {
    let pairs: Vec<(usize, &Profile, f64)> = shapes
        .iter()
        .flat_map(|s| ms.iter().map(move |&m| (s, m)))
        .enumerate()
        .map(|(i, (s, m))| (i, s, m))
        .collect();
    let mut found: Vec<(usize, Equilibrium, f64)> = pairs
        .par_iter()
        .filter_map(|&(i, s, m)| {
            let eq = solve_self_consistency(s, (m, m)).ok()?;
            let k = kappa(&eq).ok()?;
            Some((i, eq, k))
        })
        .collect();
    found.sort_by(|a, b| b.2.total_cmp(&a.2).then(a.0.cmp(&b.0)));
    found.into_iter().map(|(_, eq, k)| (eq, k)).collect()
}
