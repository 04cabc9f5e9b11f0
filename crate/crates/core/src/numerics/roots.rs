use super::NumericsError;

/// Brent's method on a sign-changing bracket `[lo, hi]`.
///
/// Combines bisection, secant and inverse quadratic interpolation; always
/// converges for continuous `f` with `f(lo) * f(hi) < 0`.
pub fn find_root_bracketed(
    f: impl Fn(f64) -> f64,
    lo: f64,
    hi: f64,
    tol: f64,
    max_iter: usize,
) -> Result<f64, NumericsError> {
    let mut a = lo;
    let mut b = hi;
    let mut fa = f(a);
    let mut fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa * fb > 0.0 || !fa.is_finite() || !fb.is_finite() {
        return Err(NumericsError::NoBracket { lo, hi, flo: fa, fhi: fb });
    }
    let mut c = a;
    let mut fc = fa;
    let mut d = b - a;
    let mut e = d;
    for _ in 0..max_iter {
        if fb * fc > 0.0 {
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
            return Ok(b);
        }
        if e.abs() >= tol1 && fa.abs() > fb.abs() {
            // attempt inverse quadratic / secant interpolation
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
        if d.abs() > tol1 {
            b += d;
        } else {
            b += tol1.copysign(xm);
        }
        fb = f(b);
        if !fb.is_finite() {
            return Err(NumericsError::NonFinite { context: "root function", t: b });
        }
    }
    Err(NumericsError::RootMaxIter(max_iter))
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOL: f64 = 1e-10;

    #[test]
    fn affine_root() {
        let r = find_root_bracketed(|x| x - 2.0, 0.0, 5.0, TOL, 200).unwrap();
        assert!((r - 2.0).abs() < TOL);
    }

    #[test]
    fn sqrt2_root() {
        let r = find_root_bracketed(|x| x * x - 2.0, 1.0, 2.0, TOL, 200).unwrap();
        assert!((r - 2f64.sqrt()).abs() < TOL);
    }

    #[test]
    fn constant_coefficient_reproduction_root() {
        // f(S) = beta0*S/mu_hat - 1 vanishes at S = mu_hat/beta0
        let (beta0, mu_hat) = (2.0, 1.0);
        let r = find_root_bracketed(
            |s| beta0 * s / mu_hat - 1.0,
            0.0,
            10.0 * mu_hat / beta0,
            TOL,
            200,
        )
        .unwrap();
        assert!((r - mu_hat / beta0).abs() < TOL);
    }

    #[test]
    fn missing_bracket_is_error() {
        assert!(matches!(
            find_root_bracketed(|x| x * x + 1.0, -1.0, 1.0, TOL, 200),
            Err(NumericsError::NoBracket { .. })
        ));
    }
}
