//! Inhomogeneous steady states of the Hamiltonian Mean Field model.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod appendix;
pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod fixtures;
pub mod grid;
pub mod pendulum;
pub mod profile;
pub mod quadrature;
pub mod scenario;
pub mod spectral;
pub mod spline;
pub mod vlasov;

pub use error::{HmfError, Result};
