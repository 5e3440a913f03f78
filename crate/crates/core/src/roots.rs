//! Bracketed scalar root finding.

use serde::Serialize;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RootReport {
    pub root: f64,
    pub iterations: usize,
    /// `|f(root)|`.
    pub residual: f64,
}

pub const MAX_ITER: usize = 200;

/// Brent's method on `[lo, hi]`. The bracket must contain a sign change;
/// every iterate stays inside the current bracket.
pub fn brent<F>(mut f: F, lo: f64, hi: f64, xtol: f64) -> Result<RootReport>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok(RootReport { root: a, iterations: 0, residual: 0.0 });
    }
    if fb == 0.0 {
        return Ok(RootReport { root: b, iterations: 0, residual: 0.0 });
    }
    if fa.signum() == fb.signum() || fa.is_nan() || fb.is_nan() {
        return Err(Error::NotBracketed { lo, hi, f_lo: fa, f_hi: fb });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=MAX_ITER {
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
            return Ok(RootReport { root: b, iterations: iter, residual: fb.abs() });
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
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
        fb = f(b)?;
    }
    Err(Error::NoConvergence(MAX_ITER))
}

/// Plain bisection on a boolean predicate that is `false` at `lo` and `true`
/// at `hi`. Returns the final bracket.
pub fn bisect_predicate<F>(mut pred: F, lo: f64, hi: f64, width: f64) -> Result<(f64, f64)>
where
    F: FnMut(f64) -> Result<bool>,
{
    let (mut lo, mut hi) = (lo, hi);
    while hi - lo > width {
        let mid = 0.5 * (lo + hi);
        if pred(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_cube_root() {
        let r = brent(|x| Ok(x * x * x - 2.0), 0.0, 2.0, 1e-15).unwrap();
        assert!((r.root - 2f64.cbrt()).abs() < 1e-14);
        assert!(r.iterations < 60);
    }

    #[test]
    fn rejects_bad_bracket() {
        let r = brent(|x| Ok(x * x + 1.0), -1.0, 1.0, 1e-12);
        assert!(matches!(r, Err(Error::NotBracketed { .. })));
    }

    #[test]
    fn handles_steep_function() {
        let r = brent(|x| Ok((x - 0.3).tan() * 1e6), 0.0, 1.0, 1e-14).unwrap();
        assert!((r.root - 0.3).abs() < 1e-13);
    }

    #[test]
    fn bisection_width() {
        let (lo, hi) = bisect_predicate(|x| Ok(x > 0.123), 0.0, 1.0, 1e-3).unwrap();
        assert!(hi - lo <= 1e-3 && lo <= 0.123 && hi > 0.123);
    }
}
