//! Scalar numerics shared by the fitting code.

/// `ln(1 + x)` to a few ulp via the ordinary logarithm, which is markedly
/// cheaper than the libm `log1p` in the likelihood loops.
#[inline]
pub(crate) fn ln_1p(x: f64) -> f64 {
    let w = 1.0 + x;
    let d = w - 1.0;
    if d == 0.0 {
        x
    } else if w.is_infinite() {
        w
    } else {
        w.ln() * (x / d)
    }
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub converged: bool,
}

/// Brent's method for a root of `f` inside `[a, b]`, where `fa` and `fb`
/// must have opposite signs (or one of them is zero).
///
/// Stops when the bracket is narrower than `xtol` or `|f| <= ftol`.
pub(crate) fn brent_root<F>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    mut fa: f64,
    mut fb: f64,
    xtol: f64,
    ftol: f64,
    max_iter: usize,
) -> Root
where
    F: FnMut(f64) -> f64,
{
    debug_assert!(fa * fb <= 0.0, "root is not bracketed");
    if fa == 0.0 {
        return Root { x: a, converged: true };
    }
    if fb == 0.0 {
        return Root { x: b, converged: true };
    }
    let mut c = a;
    let mut fc = fa;
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
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * xtol;
        let m = 0.5 * (c - b);
        if m.abs() <= tol || fb.abs() <= ftol {
            return Root { x: b, converged: true };
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            // Inverse quadratic interpolation, or secant when only two points.
            let s = fb / fa;
            let (mut p, mut q) = if a == c {
                (2.0 * m * s, 1.0 - s)
            } else {
                let q = fa / fc;
                let r = fb / fc;
                (
                    s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0)),
                    (q - 1.0) * (r - 1.0) * (s - 1.0),
                )
            };
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
        fb = f(b);
    }
    Root { x: b, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ln_1p_matches_libm() {
        let mut x = 1e-300f64;
        while x < 1e300 {
            for v in [x, -x.min(1.0 - 1e-16)] {
                let want = v.ln_1p();
                assert!((ln_1p(v) - want).abs() <= 8.0 * f64::EPSILON * want.abs(), "{v}");
            }
            x *= 1.37;
        }
        assert_eq!(ln_1p(0.0), 0.0);
        assert_eq!(ln_1p(-1.0), f64::NEG_INFINITY);
        assert_eq!(ln_1p(f64::INFINITY), f64::INFINITY);
    }

    #[test]
    fn finds_simple_roots() {
        let f = |x: f64| x * x - 2.0;
        let r = brent_root(f, 0.0, 2.0, f(0.0), f(2.0), 1e-14, 0.0, 100);
        assert!(r.converged);
        assert!((r.x - 2f64.sqrt()).abs() < 1e-13);

        let g = |x: f64| x.cos() - x;
        let r = brent_root(g, 1.0, 0.0, g(1.0), g(0.0), 1e-14, 0.0, 100);
        assert!((r.x - 0.739_085_133_215_160_7).abs() < 1e-13);
    }

    #[test]
    fn endpoint_roots_short_circuit() {
        let r = brent_root(|x| x, 0.0, 1.0, 0.0, 1.0, 1e-12, 0.0, 10);
        assert_eq!(r.x, 0.0);
    }

    #[test]
    fn handles_steep_functions() {
        let f = |x: f64| (x - 0.3).powi(3) * 1e6;
        let r = brent_root(f, -5.0, 5.0, f(-5.0), f(5.0), 1e-12, 0.0, 200);
        assert!(r.converged);
        assert!((r.x - 0.3).abs() < 1e-4);
    }
}
