//! Cubic B-spline interpolation at a constant shift on a periodic uniform grid.
//!
//! A shift of `s` cells maps samples `f_i` to the spline value at `i - s`.
//! The prefilter solves the cyclic system `(c_{i-1} + 4 c_i + c_{i+1}) / 6 = f_i`;
//! since the basis is a partition of unity, the sum of the samples is
//! preserved up to rounding.

/// Cyclic tridiagonal solver for `tridiag(1, 4, 1) x = 6 f`, factored once per
/// length by Sherman–Morrison on top of the Thomas algorithm.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    n: usize,
    cp: Vec<f64>,
    inv: Vec<f64>,
    u: Vec<f64>,
    corr_den: f64,
}

const GAMMA: f64 = -4.0;

impl PeriodicSpline {
    pub fn new(n: usize) -> Self {
        assert!(n >= 3, "periodic spline needs at least three nodes");
        // Modified diagonal of the non-cyclic part.
        let mut diag = vec![4.0; n];
        diag[0] = 4.0 - GAMMA;
        diag[n - 1] = 4.0 - 1.0 / GAMMA;
        let mut cp = vec![0.0; n];
        let mut inv = vec![0.0; n];
        inv[0] = 1.0 / diag[0];
        cp[0] = inv[0];
        for i in 1..n {
            inv[i] = 1.0 / (diag[i] - cp[i - 1]);
            cp[i] = inv[i];
        }
        let mut s = Self {
            n,
            cp,
            inv,
            u: Vec::new(),
            corr_den: 0.0,
        };
        let mut rhs = vec![0.0; n];
        rhs[0] = GAMMA;
        rhs[n - 1] = 1.0;
        let mut u = vec![0.0; n];
        s.thomas(&rhs, &mut u);
        s.corr_den = 1.0 + u[0] + u[n - 1] / GAMMA;
        s.u = u;
        s
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    fn thomas(&self, rhs: &[f64], x: &mut [f64]) {
        let n = self.n;
        x[0] = rhs[0] * self.inv[0];
        for i in 1..n {
            x[i] = (rhs[i] - x[i - 1]) * self.inv[i];
        }
        for i in (0..n - 1).rev() {
            x[i] -= self.cp[i] * x[i + 1];
        }
    }

    /// Spline coefficients of `f` written into `coeffs`.
    pub fn coefficients(&self, f: &[f64], coeffs: &mut [f64], scratch: &mut Vec<f64>) {
        let n = self.n;
        scratch.clear();
        scratch.extend(f.iter().map(|x| 6.0 * x));
        self.thomas(scratch, coeffs);
        let factor = (coeffs[0] + coeffs[n - 1] / GAMMA) / self.corr_den;
        for (c, u) in coeffs.iter_mut().zip(&self.u) {
            *c -= factor * u;
        }
    }

    /// Replaces `data[i]` by the spline value at `i - shift`.
    pub fn shift(&self, data: &mut [f64], shift: f64, work: &mut ShiftWork) {
        let n = self.n;
        debug_assert_eq!(data.len(), n);
        if shift == 0.0 {
            return;
        }
        work.coeffs.resize(n, 0.0);
        self.coefficients(data, &mut work.coeffs, &mut work.scratch);
        let y = -shift;
        let k0 = y.floor();
        let t = y - k0;
        let w = bspline_weights(t);
        let base = (k0 as i64 - 1).rem_euclid(n as i64) as usize;
        let c = &work.coeffs;
        for (i, out) in data.iter_mut().enumerate() {
            let mut k = i + base;
            if k >= n {
                k -= n;
            }
            let mut acc = 0.0;
            for wk in w {
                acc += wk * c[k];
                k += 1;
                if k == n {
                    k = 0;
                }
            }
            *out = acc;
        }
    }
}

/// Reusable buffers for [`PeriodicSpline::shift`].
#[derive(Debug, Clone, Default)]
pub struct ShiftWork {
    coeffs: Vec<f64>,
    scratch: Vec<f64>,
}

/// Weights of `c_{k-1}, c_k, c_{k+1}, c_{k+2}` at fractional offset `t ∈ [0, 1)`.
#[inline]
fn bspline_weights(t: f64) -> [f64; 4] {
    let t2 = t * t;
    let t3 = t2 * t;
    let s = 1.0 - t;
    [
        s * s * s / 6.0,
        (3.0 * t3 - 6.0 * t2 + 4.0) / 6.0,
        (-3.0 * t3 + 3.0 * t2 + 3.0 * t + 1.0) / 6.0,
        t3 / 6.0,
    ]
}
