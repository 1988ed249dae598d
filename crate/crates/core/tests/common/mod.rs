//! Oracles and fixtures shared by the integration tests.
#![allow(dead_code)]

use std::f64::consts::{FRAC_PI_2, SQRT_2};
use std::sync::OnceLock;

use hmf_core::equilibrium::{solve_self_consistency, Equilibrium};
use hmf_core::fixtures::{reference_unstable_shape, stable_shape, REFERENCE_M0, STABLE_M0};
use hmf_core::spectral::DispersionEvaluator;

/// `K(k)` from the complementary modulus `k' = sqrt(1 - k²)`, by the
/// arithmetic-geometric mean.
pub fn agm_k_comp(kp: f64) -> f64 {
    let (mut a, mut b) = (1.0f64, kp);
    // Quadratic convergence: 40 rounds are far more than f64 needs.
    for _ in 0..40 {
        let an = 0.5 * (a + b);
        b = (a * b).sqrt();
        a = an;
    }
    FRAC_PI_2 / a
}

/// Pendulum period from complete elliptic integrals.
pub fn oracle_period(m: f64, e: f64) -> f64 {
    if e < m {
        4.0 / m.sqrt() * agm_k_comp(((m - e) / (2.0 * m)).sqrt())
    } else {
        2.0 * SQRT_2 / (e + m).sqrt() * agm_k_comp(((e - m) / (e + m)).sqrt())
    }
}

pub fn reference() -> &'static Equilibrium {
    static EQ: OnceLock<Equilibrium> = OnceLock::new();
    EQ.get_or_init(|| {
        solve_self_consistency(&reference_unstable_shape(), (REFERENCE_M0, REFERENCE_M0)).unwrap()
    })
}

pub fn reference_evaluator() -> &'static DispersionEvaluator {
    static EV: OnceLock<DispersionEvaluator> = OnceLock::new();
    EV.get_or_init(|| DispersionEvaluator::new(reference()).unwrap())
}

pub fn stable() -> &'static Equilibrium {
    static EQ: OnceLock<Equilibrium> = OnceLock::new();
    EQ.get_or_init(|| solve_self_consistency(&stable_shape(), (STABLE_M0, STABLE_M0)).unwrap())
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn line_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let xm = x.iter().sum::<f64>() / n;
    let ym = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - xm) * (b - ym)).sum();
    let sxx: f64 = x.iter().map(|a| (a - xm) * (a - xm)).sum();
    let slope = sxy / sxx;
    (slope, ym - slope * xm)
}
