//! Bracketed scalar root finding.
//!
//! The indexation solve and the steady-state calibrations all reduce to a
//! monotone one-dimensional root, so a plain Brent iteration is enough.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("root is not bracketed: f({lo}) = {flo:e}, f({hi}) = {fhi:e}")]
    NotBracketed { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("root finder failed to converge within {0} iterations")]
    MaxIterations(usize),
}

const MAX_ITER: usize = 200;

/// Find a root of `f` in `[lo, hi]` with Brent's method.
///
/// `f(lo)` and `f(hi)` must have opposite signs (an endpoint evaluating to
/// exactly zero is accepted). `xtol` is an absolute tolerance on the
/// abscissa; iteration also stops when `|f|` drops below `ftol`.
pub fn brent(mut f: impl FnMut(f64) -> f64, lo: f64, hi: f64, xtol: f64, ftol: f64) -> Result<f64, SolveError> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a), f(b));
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(SolveError::NotBracketed { lo, hi, flo: fa, fhi: fb });
    }
    // b holds the best estimate, a the previous one, c the counterpoint.
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.abs() > fc.abs() {
            // make b the smaller-residual endpoint
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb.abs() <= ftol {
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // attempt inverse quadratic interpolation (secant if a == c)
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * xm * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (s * (2.0 * xm * q * (q - r) - (b - a) * (r - 1.0)), (q - 1.0) * (r - 1.0) * (s - 1.0))
            };
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            if 2.0 * p < (3.0 * xm * q - (tol1 * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = xm;
                e = d;
            }
        } else {
            d = xm;
            e = d;
        }
        a = b;
        fa = fb;
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
        if fb == 0.0 {
            return Ok(b);
        }
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
    }
    Err(SolveError::MaxIterations(MAX_ITER))
}
