//! Bracketing scalar root search (Brent: bisection safeguarded inverse
//! quadratic / secant steps).

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct RootOutcome {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final bracket, unordered.
    pub bracket: (f64, f64),
}

/// Finds `x` in `[a, b]` with `|f(x)| <= ftol` given `f(a)` and `f(b)` of
/// opposite sign (or one of them already within tolerance).
#[allow(clippy::too_many_arguments)]
pub(crate) fn brent<E>(
    mut f: impl FnMut(f64) -> Result<f64, E>,
    a: f64,
    b: f64,
    fa: f64,
    fb: f64,
    ftol: f64,
    xtol: f64,
    max_iter: usize,
) -> Result<RootOutcome, E> {
    let (mut a, mut b, mut fa, mut fb) = (a, b, fa, fb);
    if fa.abs() <= ftol {
        return Ok(RootOutcome { x: a, fx: fa, iterations: 0, converged: true, bracket: (a, b) });
    }
    if fb.abs() <= ftol {
        return Ok(RootOutcome { x: b, fx: fb, iterations: 0, converged: true, bracket: (a, b) });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
        if (fb > 0.0) == (fc > 0.0) {
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
        if fb.abs() <= ftol || m.abs() <= tol {
            return Ok(RootOutcome { x: b, fx: fb, iterations: iter, converged: fb.abs() <= ftol, bracket: (b, c) });
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
    Ok(RootOutcome { x: b, fx: fb, iterations: max_iter, converged: fb.abs() <= ftol, bracket: (b, c) })
}
