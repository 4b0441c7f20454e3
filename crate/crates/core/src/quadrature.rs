//! Adaptive Simpson quadrature.

use crate::error::{Error, Result};

/// Absolute tolerance used by the kernel-to-loss tables.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Maximum bisection depth.
pub const MAX_DEPTH: u32 = 40;
/// Residual accepted on a cell that reached `MAX_DEPTH` (jump discontinuities
/// shrink with the cell width and end up far below this).
const DEPTH_LIMIT_SLACK: f64 = 1e-9;

struct Simpson<'f, F> {
    f: &'f F,
    max_depth: u32,
    failed: bool,
}

impl<F: Fn(f64) -> f64> Simpson<'_, F> {
    #[allow(clippy::too_many_arguments)]
    fn recurse(&mut self, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = (self.f)(lm);
        let frm = (self.f)(rm);
        if !flm.is_finite() || !frm.is_finite() {
            self.failed = true;
            return f64::NAN;
        }
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        let delta = left + right - whole;
        if delta.abs() <= 15.0 * tol {
            return left + right + delta / 15.0;
        }
        if depth >= self.max_depth {
            if delta.abs() > DEPTH_LIMIT_SLACK {
                self.failed = true;
            }
            return left + right + delta / 15.0;
        }
        self.recurse(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth + 1)
            + self.recurse(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth + 1)
    }
}

/// `int_a^b f` to absolute tolerance `tol`.
///
/// Fails if `f` returns a non-finite value or the error estimate of a cell is
/// still large at the depth limit.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    if !(fa.is_finite() && fb.is_finite() && fm.is_finite()) {
        return Err(Error::Quadrature { a, b });
    }
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    let mut s = Simpson { f: &f, max_depth: MAX_DEPTH, failed: false };
    let v = s.recurse(a, fa, b, fb, m, fm, whole, tol, 0);
    if s.failed || !v.is_finite() {
        return Err(Error::Quadrature { a, b });
    }
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let v = integrate(|x| 3.0 * x * x - x + 2.0, -1.0, 2.0, 1e-12).unwrap();
        assert!((v - 13.5).abs() < 1e-13);
    }

    #[test]
    fn gaussian_against_erf() {
        // int_0^2 exp(-t^2/2) = sqrt(pi/2) erf(sqrt 2)
        let v = integrate(|t| (-0.5 * t * t).exp(), 0.0, 2.0, 1e-12).unwrap();
        let expected = (std::f64::consts::PI / 2.0).sqrt() * libm::erf(2f64.sqrt());
        assert!((v - expected).abs() < 1e-11);
        assert!((v - 1.19629).abs() < 1e-5);
    }

    #[test]
    fn jump_discontinuity_converges() {
        let v = integrate(|t| if t <= 1.0 { 1.0 } else { 0.0 }, 0.0, std::f64::consts::E, 1e-10).unwrap();
        assert!((v - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reversed_bounds_flip_sign() {
        let a = integrate(f64::cos, 0.0, 1.0, 1e-12).unwrap();
        let b = integrate(f64::cos, 1.0, 0.0, 1e-12).unwrap();
        assert!((a + b).abs() < 1e-14);
    }

    #[test]
    fn singular_integrand_fails() {
        assert!(integrate(|t| 1.0 / t, 0.0, 1.0, 1e-10).is_err());
        assert!(integrate(|t| 1.0 / t.sqrt() / t, 0.0, 1.0, 1e-10).is_err());
    }
}
