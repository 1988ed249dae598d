//! C interface to `hmf-core`.
//!
//! Objects are opaque handles created by `hmf_*_new` style functions and
//! released with the matching `*_free`. Every fallible call returns an
//! [`HmfStatus`]; on failure `hmf_last_error()` describes the cause for the
//! calling thread. Panics never cross the boundary.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use hmf_core::equilibrium::{kappa_with, solve_self_consistency, Equilibrium};
use hmf_core::grid::{read_grid, write_grid, PhaseSpaceGrid};
use hmf_core::pendulum::Pendulum;
use hmf_core::profile::Profile;
use hmf_core::spectral::{dispersion_g, eigenmode, find_growth_rate, GridShape};
use hmf_core::HmfError;

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HmfStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    /// A numerical precondition failed (separatrix, no root, support, ...).
    Numerical = 3,
    Io = 4,
    /// A malformed grid file.
    Format = 5,
    Panic = 6,
}

/// Self-consistent steady state.
pub struct HmfEquilibrium(Equilibrium);

/// Phase-space grid, θ-major.
pub struct HmfGrid(PhaseSpaceGrid);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

fn status_of(err: &HmfError) -> HmfStatus {
    match err {
        HmfError::InvalidArgument(_) | HmfError::Config { .. } | HmfError::Json(_) => {
            HmfStatus::InvalidArgument
        }
        HmfError::Io { .. } => HmfStatus::Io,
        HmfError::BadMagic { .. } | HmfError::BadVersion { .. } | HmfError::Truncated { .. } => {
            HmfStatus::Format
        }
        _ => HmfStatus::Numerical,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (HmfStatus, String)>) -> HmfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            HmfStatus::Ok
        }
        Ok(Err((status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            HmfStatus::Panic
        }
    }
}

fn lift<T>(r: hmf_core::Result<T>) -> Result<T, (HmfStatus, String)> {
    r.map_err(|e| (status_of(&e), e.to_string()))
}

fn null(name: &str) -> (HmfStatus, String) {
    (HmfStatus::NullPointer, format!("{name} is null"))
}

unsafe fn deref<'a, T>(p: *const T, name: &str) -> Result<&'a T, (HmfStatus, String)> {
    p.as_ref().ok_or_else(|| null(name))
}

unsafe fn store<T>(out: *mut T, value: T, name: &str) -> Result<(), (HmfStatus, String)> {
    if out.is_null() {
        return Err(null(name));
    }
    out.write(value);
    Ok(())
}

unsafe fn path_arg(p: *const c_char) -> Result<String, (HmfStatus, String)> {
    if p.is_null() {
        return Err(null("path"));
    }
    CStr::from_ptr(p)
        .to_str()
        .map(str::to_owned)
        .map_err(|_| (HmfStatus::InvalidArgument, "path is not UTF-8".into()))
}

/// Message of the last failed call on this thread; empty after a success.
/// Valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn hmf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Library version, a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn hmf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Period of the pendulum orbit of energy `e0` in the well of depth `m0`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_pendulum_period(m0: f64, e0: f64, out: *mut f64) -> HmfStatus {
    guard(|| {
        let p = lift(Pendulum::new(m0))?;
        store(out, lift(p.period(e0))?, "out")
    })
}

fn new_equilibrium(shape: Profile, m0: f64, out: *mut *mut HmfEquilibrium) -> HmfStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let eq = lift(solve_self_consistency(&shape, (m0, m0)))?;
        // SAFETY: checked non-null above.
        unsafe { out.write(Box::into_raw(Box::new(HmfEquilibrium(eq)))) };
        Ok(())
    })
}

/// Steady state with profile `A exp(-1/(e_star - e))`, `A` chosen so that
/// the magnetization is `m0`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_equilibrium_new_bump(
    e_star: f64,
    m0: f64,
    out: *mut *mut HmfEquilibrium,
) -> HmfStatus {
    new_equilibrium(Profile::bump_compact(e_star, 1.0), m0, out)
}

/// Steady state with a smooth step at `e_sharp` of width `scale` plus an
/// `epsilon` bump cut off at `e_star`.
///
/// # Safety
/// `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_equilibrium_new_step(
    e_sharp: f64,
    scale: f64,
    e_star: f64,
    epsilon: f64,
    m0: f64,
    out: *mut *mut HmfEquilibrium,
) -> HmfStatus {
    new_equilibrium(
        Profile::psi_plus_bump(e_sharp, scale, e_star, epsilon, 1.0),
        m0,
        out,
    )
}

/// # Safety
/// `eq` must be null or a handle from `hmf_equilibrium_new_*` not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hmf_equilibrium_free(eq: *mut HmfEquilibrium) {
    if !eq.is_null() {
        drop(Box::from_raw(eq));
    }
}

/// Magnetization and normalized profile amplitude.
///
/// # Safety
/// `eq` must be a live handle; the outputs must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_equilibrium_info(
    eq: *const HmfEquilibrium,
    m0: *mut f64,
    amplitude: *mut f64,
) -> HmfStatus {
    guard(|| {
        let eq = &deref(eq, "eq")?.0;
        store(m0, eq.m0, "m0")?;
        store(amplitude, eq.profile.amplitude, "amplitude")
    })
}

/// The instability criterion κ on an `n_theta x n_v` quadrature.
///
/// # Safety
/// `eq` must be a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_kappa(
    eq: *const HmfEquilibrium,
    n_theta: usize,
    n_v: usize,
    out: *mut f64,
) -> HmfStatus {
    guard(|| {
        let eq = &deref(eq, "eq")?.0;
        store(out, lift(kappa_with(eq, (n_theta, n_v)))?, "out")
    })
}

/// The dispersion function `G(lambda)`.
///
/// # Safety
/// `eq` must be a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_dispersion(
    eq: *const HmfEquilibrium,
    lambda: f64,
    out: *mut f64,
) -> HmfStatus {
    guard(|| {
        let eq = &deref(eq, "eq")?.0;
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err((
                HmfStatus::InvalidArgument,
                format!("lambda must be positive, got {lambda}"),
            ));
        }
        store(out, lift(dispersion_g(lambda, eq))?, "out")
    })
}

/// Root of `G` on `(0, lambda_max]`. `*found` is set to 1 with the root in
/// `*lambda_star`, or to 0 when `G` shows no sign change.
///
/// # Safety
/// `eq` must be a live handle; the outputs must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_growth_rate(
    eq: *const HmfEquilibrium,
    lambda_max: f64,
    lambda_star: *mut f64,
    found: *mut i32,
) -> HmfStatus {
    guard(|| {
        let eq = &deref(eq, "eq")?.0;
        if lambda_star.is_null() {
            return Err(null("lambda_star"));
        }
        match lift(find_growth_rate(eq, lambda_max))? {
            Some(r) => {
                store(lambda_star, r.lambda_star, "lambda_star")?;
                store(found, 1, "found")
            }
            None => store(found, 0, "found"),
        }
    })
}

/// Unstable eigenmode for the root `lambda_star` on an `n_theta x n_v` grid
/// over `[-v_max, v_max]`.
///
/// # Safety
/// `eq` must be a live handle; `out` must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_eigenmode(
    eq: *const HmfEquilibrium,
    lambda_star: f64,
    n_theta: usize,
    n_v: usize,
    v_max: f64,
    out: *mut *mut HmfGrid,
) -> HmfStatus {
    guard(|| {
        let eq = &deref(eq, "eq")?.0;
        if out.is_null() {
            return Err(null("out"));
        }
        let shape = GridShape {
            n_theta,
            n_v,
            v_max,
        };
        let mode = lift(eigenmode(eq, lambda_star, shape))?;
        out.write(Box::into_raw(Box::new(HmfGrid(mode.grid))));
        Ok(())
    })
}

/// Reads a grid file.
///
/// # Safety
/// `path` must be null or a NUL-terminated string; `out` must be null or
/// valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_grid_read(path: *const c_char, out: *mut *mut HmfGrid) -> HmfStatus {
    guard(|| {
        let path = path_arg(path)?;
        if out.is_null() {
            return Err(null("out"));
        }
        let g = lift(read_grid(path))?;
        out.write(Box::into_raw(Box::new(HmfGrid(g))));
        Ok(())
    })
}

/// Writes a grid file.
///
/// # Safety
/// `grid` must be a live handle; `path` must be null or NUL-terminated.
#[no_mangle]
pub unsafe extern "C" fn hmf_grid_write(grid: *const HmfGrid, path: *const c_char) -> HmfStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        let path = path_arg(path)?;
        lift(write_grid(g, path))
    })
}

/// Grid dimensions and velocity bound.
///
/// # Safety
/// `grid` must be a live handle; the outputs must be null or valid for writes.
#[no_mangle]
pub unsafe extern "C" fn hmf_grid_shape(
    grid: *const HmfGrid,
    n_theta: *mut usize,
    n_v: *mut usize,
    v_max: *mut f64,
) -> HmfStatus {
    guard(|| {
        let g = &deref(grid, "grid")?.0;
        store(n_theta, g.n_theta, "n_theta")?;
        store(n_v, g.n_v, "n_v")?;
        store(v_max, g.v_max, "v_max")
    })
}

/// Pointer to the `n_theta * n_v` values, θ-major, owned by the grid. Null
/// if `grid` is null.
///
/// # Safety
/// `grid` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn hmf_grid_values(grid: *const HmfGrid) -> *const f64 {
    match grid.as_ref() {
        Some(g) => g.0.values.as_ptr(),
        None => ptr::null(),
    }
}

/// # Safety
/// `grid` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn hmf_grid_free(grid: *mut HmfGrid) {
    if !grid.is_null() {
        drop(Box::from_raw(grid));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn panics_become_status() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, HmfStatus::Panic);
        let msg = unsafe { CStr::from_ptr(hmf_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "internal panic");
    }

    #[test]
    fn interior_nul_in_message_is_replaced() {
        set_error("a\0b");
        let msg = unsafe { CStr::from_ptr(hmf_last_error()) };
        assert_eq!(msg.to_str().unwrap(), "a b");
    }

    #[test]
    fn null_output_rejected() {
        let s = unsafe { hmf_pendulum_period(1.0, 0.0, ptr::null_mut()) };
        assert_eq!(s, HmfStatus::NullPointer);
    }

    #[test]
    fn status_mapping() {
        assert_eq!(
            status_of(&HmfError::InvalidArgument("x".into())),
            HmfStatus::InvalidArgument
        );
        assert_eq!(
            status_of(&HmfError::BadVersion {
                expected: 1,
                found: 2
            }),
            HmfStatus::Format
        );
        assert_eq!(
            status_of(&HmfError::NoOrbit { e0: -2.0, m0: 1.0 }),
            HmfStatus::Numerical
        );
    }
}
