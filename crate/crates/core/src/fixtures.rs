//! Named steady states used by the scenarios, the tests and the acceptance
//! suite, with their frozen regression constants.
//!
//! The reference unstable state is the top-ranked entry of
//! [`search_unstable`](crate::equilibrium::search_unstable) over
//! [`search_grid`]. Regenerate the constants with
//!
//! ```text
//! hmf kappa --config scenarios/reference_unstable.json --out out/ref
//! hmf dispersion --config scenarios/reference_unstable.json --out out/ref
//! ```

use crate::profile::Profile;

/// Magnetization of every state in the search grid.
pub const REFERENCE_M0: f64 = 16.0;

/// κ of the reference unstable state (256x256 quadrature).
pub const REFERENCE_KAPPA: f64 = 1.0804052392;

/// Positive root of the dispersion function of the reference unstable state.
pub const REFERENCE_LAMBDA_STAR: f64 = 1.1069463755876865;

/// Step position of the smooth step, as a fraction of `m0`.
const SEARCH_SHARP: [f64; 3] = [0.9, 0.95, 0.99];
/// Width of the smooth step, as a fraction of `m0`.
const SEARCH_SCALE: [f64; 2] = [0.04, 0.08];
const SEARCH_EPSILON: f64 = 1e-3;

/// Step profile at `e_sharp = sharp * m`, width `scale * m`, with the bump
/// cutoff halfway between the step and the separatrix.
pub fn step_shape(m: f64, sharp: f64, scale: f64) -> Profile {
    let e_sharp = sharp * m;
    let e_star = 0.5 * (e_sharp + m);
    Profile::psi_plus_bump(e_sharp, scale * m, e_star, SEARCH_EPSILON, 1.0)
}

/// Shapes and magnetizations scanned for an unstable state.
pub fn search_grid() -> (Vec<Profile>, Vec<f64>) {
    let shapes = SEARCH_SHARP
        .iter()
        .flat_map(|&a| {
            SEARCH_SCALE
                .iter()
                .map(move |&s| step_shape(REFERENCE_M0, a, s))
        })
        .collect();
    (shapes, vec![REFERENCE_M0])
}

/// Shape of the reference unstable state, before amplitude normalization.
pub fn reference_unstable_shape() -> Profile {
    step_shape(REFERENCE_M0, 0.99, 0.04)
}

/// A monotone bump well inside the well, with κ < 1.
pub fn stable_shape() -> Profile {
    Profile::bump_compact(-0.5, 1.0)
}

/// Magnetization of the stable state.
pub const STABLE_M0: f64 = 1.0;
