//! Bracketed scalar root finding (Brent's method).

#[derive(Debug, Clone, Copy)]
pub(crate) struct Root {
    pub x: f64,
    pub fx: f64,
    pub iterations: usize,
    pub bracket_width: f64,
}

// Non-finite values (poles of the likelihood equation) are mapped to a
// signed sentinel so that sign bookkeeping keeps working.
fn sanitize(v: f64) -> f64 {
    if v.is_nan() {
        -f64::MAX
    } else {
        v
    }
}

/// Brent's method on `[a, b]` with `f(a)`, `f(b)` of opposite sign.
/// Stops once the bracket is narrower than `tol` or an exact zero is hit.
pub(crate) fn brent(mut f: impl FnMut(f64) -> f64, a: f64, b: f64, tol: f64, max_iter: usize) -> Option<Root> {
    let (mut a, mut b) = (a, b);
    let mut fa = sanitize(f(a));
    let mut fb = sanitize(f(b));
    if fa == 0.0 {
        return Some(Root { x: a, fx: 0.0, iterations: 0, bracket_width: 0.0 });
    }
    if fb == 0.0 {
        return Some(Root { x: b, fx: 0.0, iterations: 0, bracket_width: 0.0 });
    }
    if fa.signum() == fb.signum() {
        return None;
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for iter in 1..=max_iter {
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
        let tol1 = 2.0 * f64::EPSILON * b.abs() + 0.5 * tol;
        let xm = 0.5 * (c - b);
        if xm.abs() <= tol1 || fb == 0.0 {
            return Some(finish(&mut f, b, fb, c, fc, iter));
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() && fa.is_finite() && fb.is_finite() && fc.is_finite() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * xm * s;
                q = 1.0 - s;
            } else {
                let qq = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * xm * qq * (qq - r) - (b - a) * (r - 1.0));
                q = (qq - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            }
            p = p.abs();
            let min1 = 3.0 * xm * q - (tol1 * q).abs();
            let min2 = (e * q).abs();
            if 2.0 * p < min1.min(min2) {
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
        b += if d.abs() > tol1 { d } else { tol1.copysign(xm) };
        fb = sanitize(f(b));
    }
    Some(Root { x: b, fx: fb, iterations: max_iter, bracket_width: (c - b).abs() })
}

// Once the bracket is below tolerance, one linear interpolation between its
// ends places the estimate far inside it for any smooth function.
fn finish(f: &mut impl FnMut(f64) -> f64, b: f64, fb: f64, c: f64, fc: f64, iterations: usize) -> Root {
    let bracket_width = (c - b).abs();
    if fb != 0.0 && fc.is_finite() && fb.signum() != fc.signum() {
        let x = b - fb * (c - b) / (fc - fb);
        if x.is_finite() && (x - b) * (x - c) <= 0.0 {
            let fx = sanitize(f(x));
            if fx.abs() <= fb.abs() {
                return Root { x, fx, iterations, bracket_width };
            }
        }
    }
    Root { x: b, fx: fb, iterations, bracket_width }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_simple_roots() {
        let r = brent(|x| x * x - 2.0, 0.0, 2.0, 1e-14, 100).unwrap();
        assert!((r.x - 2f64.sqrt()).abs() < 1e-13);
        let r = brent(|x| x.cos() - x, 0.0, 1.0, 1e-15, 100).unwrap();
        assert!((r.x - 0.739_085_133_215_160_6).abs() < 1e-14);
    }

    #[test]
    fn rejects_unbracketed_interval() {
        assert!(brent(|x| x * x + 1.0, -1.0, 1.0, 1e-12, 100).is_none());
    }

    #[test]
    fn resolves_roots_far_below_tolerance_scale() {
        // A linear function at the femtosecond scale: the secant step lands
        // on the root long before the bracket closes.
        let root = 3.7e-28;
        let r = brent(|x| 6e30 * (x - root), -1e-22, 1e-22, 1e-21, 100).unwrap();
        assert!((r.x - root).abs() < 1e-36);
    }
}
