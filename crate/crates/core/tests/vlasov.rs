mod common;

use common::{reference, reference_evaluator, stable};
use hmf_core::fixtures::REFERENCE_LAMBDA_STAR;
use hmf_core::grid::PhaseSpaceGrid;
use hmf_core::spectral::{
    build_perturbed_initial, eigenmode_with, equilibrium_grid, GridShape, PerturbationSpec,
};
use hmf_core::vlasov::*;
use proptest::prelude::*;

/// Backward characteristic of `θ'' = -m sin θ` over time `t`, by RK4.
fn pendulum_back(m: f64, theta: f64, v: f64, t: f64) -> (f64, f64) {
    let n = (t / 1e-3).ceil() as usize;
    let h = -t / n as f64;
    let rhs = |th: f64, w: f64| (w, -m * th.sin());
    let (mut th, mut w) = (theta, v);
    for _ in 0..n {
        let k1 = rhs(th, w);
        let k2 = rhs(th + 0.5 * h * k1.0, w + 0.5 * h * k1.1);
        let k3 = rhs(th + 0.5 * h * k2.0, w + 0.5 * h * k2.1);
        let k4 = rhs(th + h * k3.0, w + h * k3.1);
        th += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        w += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
    }
    (th, w)
}

fn blob(theta: f64, v: f64) -> f64 {
    (-(v - 4.0).powi(2) / 0.32).exp() * (1.0 + 0.5 * (2.0 * theta).cos() + 0.2 * theta.sin())
}

fn max_abs_diff(a: &PhaseSpaceGrid, b: &PhaseSpaceGrid) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

#[test]
fn linearized_step_transports_along_pendulum_orbits() {
    // Away from the support of f0 the source vanishes and the linearized
    // equation is transport in the fixed pendulum field.
    let eq = stable();
    let (t_end, dt) = (1.0, 0.01);
    let mut h = PhaseSpaceGrid::from_fn(256, 513, 8.0, blob).unwrap();
    for _ in 0..(t_end / dt) as usize {
        h = step_linearized(&h, eq, dt).unwrap();
    }
    let exact = PhaseSpaceGrid::from_fn(256, 513, 8.0, |th, v| {
        let (a, b) = pendulum_back(eq.m0, th, v, t_end);
        blob(a, b)
    })
    .unwrap();
    // Inside the support the field of h drives a response of f0; compare
    // only the transported blob.
    let mut err = 0.0f64;
    for i in 0..h.n_theta {
        for j in (0..h.n_v).filter(|&j| h.v(j).abs() >= 2.0) {
            err = err.max((h.at(i, j) - exact.at(i, j)).abs());
        }
    }
    assert!(err < 1e-4, "max error {err:e}");
}

#[test]
fn nonlinear_step_conserves_mass() {
    let g0 = PhaseSpaceGrid::from_fn(64, 129, 8.0, |th, v| {
        (-v * v).exp() * (1.0 + 0.05 * th.cos() + 0.1 * (3.0 * th).sin())
    })
    .unwrap();
    let m0 = g0.integral();
    let mut g = g0;
    for _ in 0..100 {
        g = step_nonlinear(&g, 0.02).unwrap();
    }
    assert!(((g.integral() - m0) / m0).abs() < 1e-12);
}

fn round_trip_error(n_theta: usize, n_v: usize) -> f64 {
    let g0 = PhaseSpaceGrid::from_fn(n_theta, n_v, 8.0, |th, v| {
        (-v * v).exp() * (1.0 + 0.3 * th.cos())
    })
    .unwrap();
    let mut g = g0.clone();
    for _ in 0..20 {
        g = step_nonlinear(&g, 0.05).unwrap();
    }
    for _ in 0..20 {
        g = step_nonlinear(&g, -0.05).unwrap();
    }
    g.l1_distance(&g0).unwrap() / g0.l1_norm()
}

#[test]
fn nonlinear_step_runs_backward() {
    // Only interpolation stands between the scheme and exact reversal, so
    // the round-trip defect falls at fourth order.
    let coarse = round_trip_error(64, 129);
    let fine = round_trip_error(128, 257);
    assert!(fine < 1e-4, "round trip error {fine:e}");
    assert!(coarse / fine > 12.0, "{coarse:e} -> {fine:e}");
}

#[test]
fn evolve_reports_exact_deviation_and_full_state() {
    let eq = stable();
    let f0 = PhaseSpaceGrid::from_fn(32, 65, 3.0, |th, v| eq.density(th, v)).unwrap();
    let params = EvolveParams {
        dt: 0.05,
        t_end: 0.5,
        diag_stride: 2,
        dynamics: Dynamics::Perturbation,
    };
    let mut seen = 0;
    let (d, f) = evolve(&f0, &f0, eq, &params, |_, _| {
        seen += 1;
        Ok(())
    })
    .unwrap();
    assert_eq!(seen, 10);
    assert_eq!(d.rows.len(), 6);
    assert!(d.rows.iter().all(|r| r.l1_dev == 0.0));
    assert_eq!(f, f0);
}

#[test]
fn evolve_rejects_mismatched_reference() {
    let eq = stable();
    let a = PhaseSpaceGrid::zeros(16, 17, 3.0).unwrap();
    let b = PhaseSpaceGrid::zeros(16, 19, 3.0).unwrap();
    let params = EvolveParams {
        dt: 0.1,
        t_end: 1.0,
        diag_stride: 1,
        dynamics: Dynamics::Linearized,
    };
    assert!(evolve(&a, &b, eq, &params, |_, _| Ok(())).is_err());
}

/// Exact solution after one short step: `f` carried back along the
/// characteristic of the initial field, which moves by `O(dt²)` only.
fn one_step_error(n_theta: usize, n_v: usize, dt: f64) -> f64 {
    let f = |th: f64, v: f64| (-v * v).exp() * (1.0 + 0.3 * th.cos() + 0.1 * (2.0 * th).sin());
    let g = PhaseSpaceGrid::from_fn(n_theta, n_v, 6.0, f).unwrap();
    // ∬ e^{-v²} cos² θ = π^{3/2}, and the sin 2θ term adds nothing.
    let mx = 0.3 * std::f64::consts::PI.powf(1.5);
    let field = compute_field(&g);
    assert!((field.mx - mx).abs() < 1e-12 && field.my.abs() < 1e-12);
    let s = step_nonlinear(&g, dt).unwrap();
    let mut err: f64 = 0.0;
    for i in 0..n_theta {
        for j in 0..n_v {
            let (th, v) = pendulum_back(mx, g.theta(i), g.v(j), dt);
            err = err.max((s.at(i, j) - f(th, v)).abs());
        }
    }
    err
}

#[test]
fn nonlinear_step_follows_characteristics() {
    // Per step the error is spline interpolation error, proportional to the
    // shift: first order in dt and about h⁴ in the velocity spacing.
    let coarse = one_step_error(32, 33, 1e-4);
    assert!(coarse < 1e-6, "{coarse:e}");
    let ratio = one_step_error(32, 33, 1e-3) / coarse;
    assert!((8.0..12.0).contains(&ratio), "{ratio}");
    let fine = one_step_error(32, 65, 1e-4);
    assert!(fine < 1e-7 && coarse / fine > 12.0, "{fine:e}");
}

#[test]
fn short_steps_are_reversible() {
    let g0 = PhaseSpaceGrid::from_fn(256, 257, 8.0, |th, v| {
        (-v * v).exp() * (1.0 + 0.3 * th.cos())
    })
    .unwrap();
    let back = step_nonlinear(&step_nonlinear(&g0, 1e-4).unwrap(), -1e-4).unwrap();
    let err = back.l1_distance(&g0).unwrap() / g0.l1_norm();
    assert!(err < 1e-9, "{err:e}");
}

#[test]
fn equilibrium_grid_reproduces_magnetization() {
    let eq = stable();
    let shape = GridShape {
        n_theta: 256,
        n_v: 257,
        v_max: default_v_max(eq),
    };
    let field = compute_field(&equilibrium_grid(eq, shape).unwrap());
    assert!((field.mx - eq.m0).abs() < 1e-6, "{}", field.mx - eq.m0);
    assert!(field.my.abs() < 1e-12);
}

#[test]
fn linearized_step_keeps_neutral_energy_functions() {
    // A function of e0 alone with no magnetization feels no source and
    // is carried along the orbits it already fills.
    let eq = stable();
    let e = |th: f64, v: f64| 0.5 * v * v - eq.m0 * th.cos();
    let a = PhaseSpaceGrid::from_fn(64, 129, 8.0, |th, v| (-e(th, v)).exp()).unwrap();
    let b = PhaseSpaceGrid::from_fn(64, 129, 8.0, |th, v| (-2.0 * e(th, v)).exp()).unwrap();
    let c = compute_field(&a).mx / compute_field(&b).mx;
    let h0 = PhaseSpaceGrid::from_fn(64, 129, 8.0, |th, v| {
        (-e(th, v)).exp() - c * (-2.0 * e(th, v)).exp()
    })
    .unwrap();
    let mut h = h0.clone();
    for _ in 0..100 {
        h = step_linearized(&h, eq, 0.01).unwrap();
    }
    let err = h.l1_distance(&h0).unwrap() / h0.l1_norm();
    assert!(err < 1e-4, "{err:e}");
}

#[test]
fn small_perturbations_follow_the_linear_equation() {
    let eq = reference();
    let shape = GridShape {
        n_theta: 64,
        n_v: 129,
        v_max: default_v_max(eq),
    };
    let mode = eigenmode_with(eq, reference_evaluator(), REFERENCE_LAMBDA_STAR, shape).unwrap();
    let f0 = equilibrium_grid(eq, shape).unwrap();
    let init = build_perturbed_initial(
        eq,
        &mode,
        &PerturbationSpec::new(1e-7, eq.profile.alpha).unwrap(),
    )
    .unwrap();
    let run = |dynamics| {
        let params = EvolveParams {
            dt: 0.01,
            t_end: 5.0 / REFERENCE_LAMBDA_STAR,
            diag_stride: 50,
            dynamics,
        };
        let (_, f) = evolve(&init, &f0, eq, &params, |_, _| Ok(())).unwrap();
        let mut h = f;
        for (x, r) in h.values.iter_mut().zip(&f0.values) {
            *x -= r;
        }
        h
    };
    let nl = run(Dynamics::Perturbation);
    let lin = run(Dynamics::Linearized);
    let rel = nl.l1_distance(&lin).unwrap() / lin.l1_norm();
    assert!(rel < 1e-2, "{rel:e}");
}

fn smooth_grid(c: [f64; 4]) -> PhaseSpaceGrid {
    PhaseSpaceGrid::from_fn(32, 33, 6.0, move |th, v| {
        (-v * v).exp()
            * (1.0 + c[0] * th.cos() + c[1] * th.sin() + c[2] * (2.0 * th).cos())
            * (1.0 + c[3] * v * (-v * v).exp())
    })
    .unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn step_commutes_with_theta_shift(
        c in prop::array::uniform4(-0.4f64..0.4),
        dt in 0.01f64..0.1,
        k in 1usize..32,
    ) {
        let g = smooth_grid(c);
        let shift = |g: &PhaseSpaceGrid| {
            let mut s = g.clone();
            for i in 0..g.n_theta {
                s.values[i * g.n_v..(i + 1) * g.n_v].copy_from_slice(g.row((i + k) % g.n_theta));
            }
            s
        };
        let a = shift(&step_nonlinear(&g, dt).unwrap());
        let b = step_nonlinear(&shift(&g), dt).unwrap();
        prop_assert!(max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn step_commutes_with_mirror(
        c in prop::array::uniform4(-0.4f64..0.4),
        dt in 0.01f64..0.1,
    ) {
        let g = smooth_grid(c);
        let mirror = |g: &PhaseSpaceGrid| {
            let mut s = g.clone();
            for i in 0..g.n_theta {
                for j in 0..g.n_v {
                    let (a, b) = g.mirror(i, j);
                    s.values[i * g.n_v + j] = g.at(a, b);
                }
            }
            s
        };
        let a = mirror(&step_nonlinear(&g, dt).unwrap());
        let b = step_nonlinear(&mirror(&g), dt).unwrap();
        prop_assert!(max_abs_diff(&a, &b) < 1e-12);
    }

    #[test]
    fn linearized_step_is_linear(
        c in prop::array::uniform4(-0.4f64..0.4),
        s in -3.0f64..3.0,
    ) {
        let eq = stable();
        let g = smooth_grid(c);
        let mut scaled = g.clone();
        scaled.values.iter_mut().for_each(|x| *x *= s);
        let mut a = step_linearized(&g, eq, 0.05).unwrap();
        a.values.iter_mut().for_each(|x| *x *= s);
        let b = step_linearized(&scaled, eq, 0.05).unwrap();
        prop_assert!(max_abs_diff(&a, &b) < 1e-12 * (1.0 + s.abs()));
    }
}
