//! Bracketed scalar root finding (Brent–Dekker).

use crate::error::{Error, Result};

/// Find a root of `g` in `[a, b]` given `g(a)` and `g(b)` of opposite sign.
///
/// Terminates when the bracket is narrower than `xtol·max(1, |x|)` or an
/// exact zero is hit. Every iterate stays inside the current bracket, so the
/// worst case is plain bisection.
pub fn brent(
    mut g: impl FnMut(f64) -> Result<f64>,
    a: f64,
    b: f64,
    ga: f64,
    gb: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<f64> {
    if ga == 0.0 {
        return Ok(a);
    }
    if gb == 0.0 {
        return Ok(b);
    }
    if ga.signum() == gb.signum() {
        return Err(Error::BracketNotFound {
            log: format!("g({a}) = {ga:e} and g({b}) = {gb:e} share a sign"),
        });
    }
    let (mut a, mut b, mut fa, mut fb) = (a, b, ga, gb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol * b.abs().max(1.0);
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb == 0.0 {
            return Ok(b);
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
        fb = g(b)?;
    }
    Err(Error::RootNotConverged {
        lo: b.min(c),
        hi: b.max(c),
    })
}
