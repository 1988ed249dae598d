mod common;

use common::{reference, reference_evaluator, stable};
use hmf_core::equilibrium::{kappa, Equilibrium};
use hmf_core::fixtures::REFERENCE_LAMBDA_STAR;
use hmf_core::profile::Profile;
use hmf_core::spectral::*;
use hmf_core::HmfError;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

/// `∫_0^S λ e^{-λτ} cos Θ(-τ) dτ` with `S = 40/λ`, by classical RK4 on the
/// backward characteristic augmented with the running integral.
fn truncated_tail_g(theta: f64, v: f64, lambda: f64, m: f64) -> f64 {
    let tau_end = 40.0 / lambda;
    let n = (tau_end / 2e-4).ceil() as usize;
    let h = tau_end / n as f64;
    // Backward in time: dΘ/dτ = -V, dV/dτ = m sin Θ.
    let rhs = |t: f64, y: [f64; 3]| {
        [
            -y[1],
            m * y[0].sin(),
            lambda * (-lambda * t).exp() * y[0].cos(),
        ]
    };
    let mut y = [theta, v, 0.0];
    for k in 0..n {
        let t = k as f64 * h;
        let k1 = rhs(t, y);
        let a = |k: [f64; 3], s: f64| [y[0] + s * k[0], y[1] + s * k[1], y[2] + s * k[2]];
        let k2 = rhs(t + 0.5 * h, a(k1, 0.5 * h));
        let k3 = rhs(t + 0.5 * h, a(k2, 0.5 * h));
        let k4 = rhs(t + h, a(k3, h));
        for i in 0..3 {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
    }
    y[2]
}

#[test]
fn g_lambda_matches_direct_integration() {
    let eq = reference();
    let mut rng = rand::rngs::StdRng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 10 {
        let theta: f64 = rng.gen_range(-3.1..3.1);
        let v: f64 = rng.gen_range(-8.0..8.0);
        let e = 0.5 * v * v - eq.m0 * theta.cos();
        if e >= eq.profile.e_star || eq.pendulum().is_separatrix(e) {
            continue;
        }
        let lambda: f64 = rng.gen_range(0.3..5.0);
        let got = g_lambda(theta, v, lambda, eq).unwrap();
        let want = truncated_tail_g(theta, v, lambda, eq.m0);
        assert!(
            (got - want).abs() < 1e-8,
            "({theta}, {v}, {lambda}): {got} vs {want}"
        );
        checked += 1;
    }
}

#[test]
fn g_lambda_examples() {
    let eq = stable();
    assert_eq!(g_lambda(0.0, 0.0, 3.0, eq).unwrap(), 1.0);
    let g = g_lambda(std::f64::consts::FRAC_PI_2, 1.0, 1e3, eq).unwrap();
    assert!(g.abs() < 5e-3, "{g}");
    assert!(matches!(
        g_lambda(std::f64::consts::PI, 0.0, 1.0, eq),
        Err(HmfError::PeriodDiverges { .. })
    ));
}

#[test]
fn flat_profile_gives_unit_g() {
    // F' ≡ 0 on the support: an empty support is the simplest such profile.
    let eq = Equilibrium {
        m0: 1.0,
        residual: 0.0,
        profile: Profile::bump_compact(-2.0, 1.0),
    };
    for &l in &[1e-3, 0.1, 10.0] {
        assert_eq!(dispersion_g(l, &eq).unwrap(), 1.0);
    }
}

#[test]
fn dispersion_limits() {
    let eq = reference();
    let ev = reference_evaluator();
    let big = ev.evaluate(1e3 * eq.m0.sqrt());
    assert!((big - 1.0).abs() < 1e-3, "{big}");
    // Richardson extrapolation in λ from 1e-2, 5e-3, 2.5e-3.
    let (g1, g2, g3) = (ev.evaluate(1e-2), ev.evaluate(5e-3), ev.evaluate(2.5e-3));
    let r1 = 2.0 * g2 - g1;
    let r2 = 2.0 * g3 - g2;
    let g0 = (4.0 * r2 - r1) / 3.0;
    let k = kappa(eq).unwrap();
    assert!((g0 - (1.0 - k)).abs() < 1e-2, "{g0} vs {}", 1.0 - k);
}

#[test]
fn dispersion_is_continuous() {
    let ev = reference_evaluator();
    for &l in &[0.05, 0.5, 1.1, 3.0, 20.0] {
        let a = ev.evaluate(l);
        let b = ev.evaluate(l * (1.0 + 1e-7));
        assert!((a - b).abs() < 1e-5, "λ={l}: {a} vs {b}");
    }
}

#[test]
fn reference_root() {
    let eq = reference();
    let r = find_growth_rate_with(reference_evaluator(), default_lambda_max(eq))
        .unwrap()
        .unwrap();
    assert!(r.residual <= ROOT_TOLERANCE);
    assert!(r.g_lo < 0.0 && r.g_hi > 0.0);
    assert!(r.lambda_lo < r.lambda_star && r.lambda_star < r.lambda_hi);
    assert!(
        (r.lambda_star - REFERENCE_LAMBDA_STAR).abs() < 1e-10,
        "{}",
        r.lambda_star
    );
}

#[test]
fn stable_state_has_no_root() {
    let eq = stable();
    assert!(find_growth_rate(eq, default_lambda_max(eq))
        .unwrap()
        .is_none());
    let ev = DispersionEvaluator::new(eq).unwrap();
    let samples = ev.scan(&log_space(1e-3, 10.0, 32));
    assert!(samples.iter().all(|s| s.g > 0.0));
}

#[test]
fn eigenmode_invariants() {
    let eq = reference();
    let shape = GridShape {
        n_theta: 128,
        n_v: 129,
        v_max: 2.0 * eq.support_speed(),
    };
    let mode = eigenmode_with(eq, reference_evaluator(), REFERENCE_LAMBDA_STAR, shape).unwrap();
    assert!((mode.normalization - 1.0).abs() < 1e-6);
    let g = &mode.grid;
    assert!(sin_moment(g).abs() < 1e-10, "{}", sin_moment(g));
    for i in 0..g.n_theta {
        for j in 0..g.n_v {
            let (mi, mj) = g.mirror(i, j);
            assert_eq!(g.at(i, j), g.at(mi, mj));
            let e = 0.5 * g.v(j).powi(2) - eq.m0 * g.theta(i).cos();
            if e >= eq.profile.e_star {
                assert_eq!(g.at(i, j), 0.0);
            }
        }
    }
    assert!(g.values.iter().any(|&x| x != 0.0));
}

#[test]
fn eigenmode_rejects_non_root() {
    let shape = GridShape {
        n_theta: 16,
        n_v: 17,
        v_max: 16.0,
    };
    assert!(matches!(
        eigenmode_with(reference(), reference_evaluator(), 0.5, shape),
        Err(HmfError::NotARoot { .. })
    ));
}

#[test]
fn perturbed_data_is_nonnegative() {
    let eq = reference();
    let shape = GridShape {
        n_theta: 64,
        n_v: 65,
        v_max: 2.0 * eq.support_speed(),
    };
    let mode = eigenmode_with(eq, reference_evaluator(), REFERENCE_LAMBDA_STAR, shape).unwrap();
    let f0 = equilibrium_grid(eq, shape).unwrap();
    for &d in &[1e-4, 1e-5, 1e-6] {
        let spec = PerturbationSpec::new(d, eq.profile.alpha).unwrap();
        let init = build_perturbed_initial(eq, &mode, &spec).unwrap();
        assert!(init.values.iter().all(|&x| x >= 0.0));
        let dev = init.l1_distance(&f0).unwrap();
        assert!(dev <= d * (1.0 + 1e-9) && dev >= 0.95 * d, "{dev}");
    }
    assert!(mode.grid.values.iter().any(|&x| x < 0.0));
    // A genuine mode carries F', which vanishes at the cutoff faster than
    // f0 does. A flat negative "mode" does not, and must be refused.
    let mut flat = mode.clone();
    flat.grid.values.iter_mut().for_each(|x| *x = -1.0);
    let spec = PerturbationSpec::new(1e-4, eq.profile.alpha).unwrap();
    assert!(matches!(
        build_perturbed_initial(eq, &flat, &spec),
        Err(HmfError::DeltaTooLarge { .. })
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn g_is_bounded(theta in -3.1..3.1f64, v in -3.0..3.0f64, lambda in 1e-3..50.0f64) {
        let eq = stable();
        let e = 0.5 * v * v - eq.m0 * theta.cos();
        prop_assume!((e - eq.m0).abs() > 1e-6);
        let g = g_lambda(theta, v, lambda, eq).unwrap();
        prop_assert!(g.abs() <= 1.0 + 1e-12, "{}", g);
    }

    #[test]
    fn chi_is_dominated(t in 0.0..1.0f64, alpha in 1.0..4.0f64) {
        let c = chi(t, alpha);
        prop_assert!((0.0..=1.0).contains(&c));
        prop_assert!(c <= 2.0 * t.powf(alpha) + 1e-300);
    }

    #[test]
    fn chi_width_matches(delta in 1e-12..1.0f64, alpha in 1.0..4.0f64) {
        let s = PerturbationSpec::new(delta, alpha).unwrap();
        prop_assert!((s.chi_width.powf(2.0 * alpha) / delta - 1.0).abs() < 1e-10);
    }
}
