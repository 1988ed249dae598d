mod common;

use common::{reference, stable};
use hmf_core::equilibrium::{
    gamma, gamma_with, kappa, kappa_with, search_unstable, Equilibrium, PhaseQuadrature,
    RESIDUAL_TOLERANCE,
};
use hmf_core::fixtures::{search_grid, REFERENCE_KAPPA};
use hmf_core::pendulum::Pendulum;
use hmf_core::profile::Profile;
use hmf_core::quadrature::{panels, GaussLegendre};
use proptest::prelude::*;

/// `∫ de w(e) sqrt 2 ∫_{D_e} h (e + m cos θ)^{-1/2} dθ`: the phase-space
/// integral of `w(e0) h(θ)` rewritten in the energy variable, with
/// `dv = de / |v|` on both velocity branches.
fn energy_route(m: f64, profile: &Profile, shell: impl Fn(&Pendulum, f64) -> f64) -> f64 {
    let p = Pendulum::new(m).unwrap();
    let mut breaks = profile.breakpoints();
    breaks.retain(|&e| e > -m && e < profile.e_star);
    let rule = GaussLegendre::new(160);
    panels(-m, profile.e_star, &breaks)
        .into_iter()
        .map(|(a, b)| rule.integrate(a, b, |e| std::f64::consts::SQRT_2 * shell(&p, e)))
        .sum()
}

#[test]
fn gamma_matches_energy_route() {
    for eq in [reference(), stable()] {
        let f = &eq.profile;
        let want = energy_route(eq.m0, f, |p, e| {
            f.value(e) * p.shell_integral(e, f64::cos).unwrap()
        });
        let got = gamma(eq.m0, f).unwrap();
        assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn kappa_matches_energy_route() {
    for eq in [reference(), stable()] {
        let f = &eq.profile;
        let want = energy_route(eq.m0, f, |p, e| {
            let a = p.shell_integral(e, |_| 1.0).unwrap();
            let c1 = p.shell_integral(e, f64::cos).unwrap();
            let c2 = p.shell_integral(e, |t| t.cos().powi(2)).unwrap();
            -f.derivative(e) * (c2 - c1 * c1 / a)
        });
        let got = kappa(eq).unwrap();
        assert!((got / want - 1.0).abs() < 1e-6, "{got} vs {want}");
    }
}

#[test]
fn frozen_kappa() {
    let k = kappa(reference()).unwrap();
    assert!((k - REFERENCE_KAPPA).abs() < 1e-9, "{k}");
    assert!(k > 1.0);
    assert!(kappa(stable()).unwrap() < 1.0);
}

#[test]
fn kappa_converges_with_quadrature() {
    let eq = reference();
    let coarse = kappa_with(eq, (128, 128)).unwrap();
    let fine = kappa_with(eq, (512, 512)).unwrap();
    let mid = kappa(eq).unwrap();
    assert!((mid - fine).abs() < 1e-8, "{mid} vs {fine}");
    assert!((coarse - fine).abs() < 1e-5, "{coarse} vs {fine}");
}

#[test]
fn projector_is_orthogonal() {
    // ∬ F' (cos - Π cos) Π cos = 0, so κ = -∬ F' cos² + ∬ F' (Π cos)².
    let eq = reference();
    let p = eq.pendulum();
    let q = PhaseQuadrature::new(eq.m0, &eq.profile, 256, 256).unwrap();
    let pc = |e: f64| {
        if eq.profile.derivative(e) == 0.0 {
            0.0
        } else {
            p.orbit_average(e, f64::cos).unwrap()
        }
    };
    let cross = q.integrate(|n| {
        let a = pc(n.e0);
        eq.profile.derivative(n.e0) * (n.theta.cos() - a) * a
    });
    let scale = q.integrate(|n| eq.profile.derivative(n.e0).abs());
    assert!(cross.abs() < 1e-8 * scale, "{cross} (scale {scale})");
}

#[test]
fn self_consistency_holds_at_double_resolution() {
    for eq in [reference(), stable()] {
        assert!(eq.residual <= RESIDUAL_TOLERANCE);
        let fine = gamma_with(eq.m0, &eq.profile, (512, 512)).unwrap();
        assert!((fine - eq.m0).abs() < 1e-8 * eq.m0, "{fine}");
    }
}

#[test]
fn weak_field_limit() {
    // For m → 0 the density becomes uniform in θ and γ vanishes.
    let f = Profile::bump_compact(0.5, 1.0);
    let g = gamma(1e-6, &f).unwrap();
    let mass = PhaseQuadrature::new(1e-6, &f, 256, 256)
        .unwrap()
        .integrate(|n| f.value(n.e0));
    assert!(g.abs() < 1e-5 * mass, "{g} vs mass {mass}");
}

#[test]
fn search_is_deterministic_and_sorted() {
    let (shapes, ms) = search_grid();
    let a = search_unstable(&shapes, &ms);
    let b = search_unstable(&shapes, &ms);
    assert_eq!(a, b);
    assert!(a.windows(2).all(|w| w[0].1 >= w[1].1));
    assert!(a[0].1 > 1.0);
}

#[test]
fn equilibrium_json_shape() {
    let eq = reference();
    let text = serde_json::to_string(eq).unwrap();
    for key in [
        "family",
        "e_star",
        "amplitude",
        "alpha",
        "psi_params",
        "epsilon",
        "m0",
        "residual",
    ] {
        assert!(
            text.contains(&format!("\"{key}\"")),
            "{key} missing in {text}"
        );
    }
    let back: Equilibrium = serde_json::from_str(&text).unwrap();
    assert_eq!(&back, eq);
    let plain = serde_json::to_string(&Profile::bump_compact(0.1, 2.0)).unwrap();
    assert!(!plain.contains("psi_params") && !plain.contains("epsilon"));
}

fn any_profile() -> impl Strategy<Value = Profile> {
    prop_oneof![
        (-0.9..0.9f64).prop_map(|e| Profile::bump_compact(e, 1.0)),
        (-0.9..0.5f64, 0.05..0.4f64).prop_map(|(s, w)| Profile::psi_plus_bump(
            s,
            w,
            s + 0.3,
            1e-3,
            1.0
        )),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn profiles_are_nonincreasing(f in any_profile(), a in -1.0..1.0f64, b in -1.0..1.0f64) {
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        prop_assert!(f.value(lo) >= f.value(hi));
        prop_assert!(f.derivative(lo) <= 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn derivative_matches_finite_difference(f in any_profile(), e in -1.0..1.0f64) {
        let h = 1e-6;
        let fd = (f.value(e + h) - f.value(e - h)) / (2.0 * h);
        let d = f.derivative(e);
        prop_assert!((fd - d).abs() < 1e-5 * (1.0 + d.abs()), "e={} fd={} d={}", e, fd, d);
    }
}
