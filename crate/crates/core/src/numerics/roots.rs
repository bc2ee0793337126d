//! Bracketing root finders.

use crate::error::NumericError;

/// Brent's method on a sign-changing bracket `[a, b]`.
///
/// Terminates once the bracket is narrower than `xtol` (absolute) or the
/// function value vanishes.
pub fn brent<F>(mut f: F, a: f64, b: f64, xtol: f64) -> Result<f64, NumericError>
where
    F: FnMut(f64) -> f64,
{
    const MAX_ITER: usize = 200;
    let (mut a, mut b) = (a, b);
    let mut fa = f(a);
    let mut fb = f(b);
    if !fa.is_finite() {
        return Err(NumericError::NonFinite { at: a });
    }
    if !fb.is_finite() {
        return Err(NumericError::NonFinite { at: b });
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericError::NotBracketed {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..MAX_ITER {
        if fb.signum() == fc.signum() {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut qq);
            if a == c {
                p = 2.0 * m * s;
                qq = 1.0 - s;
            } else {
                let q0 = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * q0 * (q0 - r) - (b - a) * (r - 1.0));
                qq = (q0 - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                qq = -qq;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * qq - (tol * qq).abs()).min((e * qq).abs()) {
                e = d;
                d = p / qq;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b);
        if !fb.is_finite() {
            return Err(NumericError::NonFinite { at: b });
        }
    }
    Err(NumericError::NoConvergence {
        iterations: MAX_ITER,
    })
}

/// Grows `hi` geometrically from `lo` until `f(hi)` differs in sign from `f(lo)`.
pub fn expand_upward<F>(mut f: F, lo: f64, hi: f64, max_hi: f64) -> Result<(f64, f64), NumericError>
where
    F: FnMut(f64) -> f64,
{
    let f_lo = f(lo);
    let mut a = lo;
    let mut b = hi;
    let mut f_hi = f(b);
    while f_hi.signum() == f_lo.signum() && f_hi != 0.0 {
        if b >= max_hi {
            return Err(NumericError::NotBracketed {
                lo,
                hi: b,
                f_lo,
                f_hi,
            });
        }
        a = b;
        b = (2.0 * b).max(b + 1.0).min(max_hi);
        f_hi = f(b);
    }
    Ok((a, b))
}
