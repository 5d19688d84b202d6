//! Bracketed root finding for monotone functions.
//!
//! Every solve in the crate is a sign change of a continuous, monotone function, so a
//! bracketing method always converges. Brent's method supplies the speed; its
//! bisection fallback keeps the worst case at one halving per step.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub(crate) struct Tolerance {
    /// Absolute bracket width in x.
    pub x_abs: f64,
    /// Stop once `|f(x)| <= f_abs`.
    pub f_abs: f64,
    pub max_iter: usize,
}

/// Root of `f` inside `[a, b]` given `fa = f(a)` and `fb = f(b)` of opposite sign
/// (or one of them zero).
pub(crate) fn brent<F>(mut f: F, a: f64, b: f64, fa: f64, fb: f64, tol: Tolerance) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.is_nan() || fb.is_nan() || fa.signum() == fb.signum() {
        return Err(Error::RootFailure(format!("no sign change on [{a}, {b}]: f = ({fa:e}, {fb:e})")));
    }

    // zeroin: `b` is the best iterate, `c` keeps the bracket.
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;

    for _ in 0..tol.max_iter {
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

        let xtol = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol.x_abs;
        let m = 0.5 * (c - b);
        if m.abs() <= xtol || fb.abs() <= tol.f_abs {
            return Ok(b);
        }

        if e.abs() >= xtol && fa.abs() > fb.abs() {
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
            if 2.0 * p < (3.0 * m * q - (xtol * q).abs()).min((e * q).abs()) {
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
        b += if d.abs() > xtol { d } else { xtol.copysign(m) };
        fb = f(b)?;
        if fb.is_nan() {
            return Err(Error::RootFailure(format!("objective is NaN at {b}")));
        }
    }
    Err(Error::RootFailure(format!("no convergence after {} iterations (bracket [{b}, {c}])", tol.max_iter)))
}

/// Walk from `start` in direction `sign(step)` with geometrically growing steps until
/// `f` changes sign relative to `f(start)`. Returns `(x_prev, f_prev, x, f)`.
pub(crate) fn expand<F>(
    mut f: F,
    start: f64,
    f_start: f64,
    mut step: f64,
    max_iter: usize,
) -> Result<(f64, f64, f64, f64)>
where
    F: FnMut(f64) -> Result<f64>,
{
    let (mut x0, mut f0) = (start, f_start);
    for _ in 0..max_iter {
        let x1 = x0 + step;
        let f1 = f(x1)?;
        if f1 == 0.0 || f1.signum() != f0.signum() {
            return Ok((x0, f0, x1, f1));
        }
        x0 = x1;
        f0 = f1;
        step *= 2.0;
    }
    Err(Error::RootFailure(format!("could not bracket a sign change starting from {start}")))
}
