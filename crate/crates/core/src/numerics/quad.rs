use super::NumericsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadRule {
    Trapezoid,
    Simpson,
}

/// Composite quadrature of `f` over `[a, b]` with `n` subintervals
/// (rounded up to an even count for Simpson).
///
/// A reversed interval is an error rather than a negated value, to catch
/// logic bugs in callers.
pub fn quad(
    f: impl Fn(f64) -> f64,
    a: f64,
    b: f64,
    rule: QuadRule,
    n: usize,
) -> Result<f64, NumericsError> {
    if a > b {
        return Err(NumericsError::ReversedInterval { a, b });
    }
    if a == b {
        return Ok(0.0);
    }
    let n = match rule {
        QuadRule::Trapezoid => n.max(1),
        QuadRule::Simpson => {
            let n = n.max(2);
            if n % 2 == 0 { n } else { n + 1 }
        }
    };
    let h = (b - a) / n as f64;
    let eval = |i: usize| -> Result<f64, NumericsError> {
        let x = if i == n { b } else { a + h * i as f64 };
        let v = f(x);
        if !v.is_finite() {
            return Err(NumericsError::NonFinite { context: "quad integrand", t: x });
        }
        Ok(v)
    };
    let mut acc;
    match rule {
        QuadRule::Trapezoid => {
            acc = 0.5 * (eval(0)? + eval(n)?);
            for i in 1..n {
                acc += eval(i)?;
            }
        }
        QuadRule::Simpson => {
            acc = (eval(0)? + eval(n)?) / 3.0;
            for i in 1..n {
                let w = if i % 2 == 1 { 4.0 } else { 2.0 };
                acc += w / 3.0 * eval(i)?;
            }
        }
    }
    Ok(acc * h)
}

/// Composite Simpson weights for `n + 1` uniformly spaced nodes with spacing
/// `h`; `n` must be even.
pub(crate) fn simpson_weights(n: usize, h: f64) -> Vec<f64> {
    debug_assert!(n >= 2 && n % 2 == 0);
    let mut w = vec![0.0; n + 1];
    for i in 0..=n {
        w[i] = match () {
            _ if i == 0 || i == n => h / 3.0,
            _ if i % 2 == 1 => 4.0 * h / 3.0,
            _ => 2.0 * h / 3.0,
        };
    }
    w
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn constant_over_span() {
        assert!((quad(|_| 1.0, 0.0, 3.0, QuadRule::Trapezoid, 7).unwrap() - 3.0).abs() < 1e-14);
    }

    #[test]
    fn linear_exact_under_trapezoid() {
        let v = quad(|x| x, 0.0, 1.0, QuadRule::Trapezoid, 13).unwrap();
        assert!((v - 0.5).abs() < 1e-15);
    }

    #[test]
    fn exp_decay_simpson_h_001() {
        // f(x) = e^{-x} on [0, 10], simpson h = 0.01
        let v = quad(|x: f64| (-x).exp(), 0.0, 10.0, QuadRule::Simpson, 1000).unwrap();
        let exact = 1.0 - (-10.0f64).exp();
        assert!((v - exact).abs() < 1e-9, "err {}", (v - exact).abs());
    }

    #[test]
    fn reversed_interval_is_error() {
        assert!(quad(|_| 1.0, 1.0, 0.0, QuadRule::Trapezoid, 4).is_err());
    }

    #[test]
    fn simpson_weights_sum_to_span() {
        let w = simpson_weights(10, 0.1);
        let total: f64 = w.iter().sum();
        assert!((total - 1.0).abs() < 1e-14);
    }

    proptest! {
        #[test]
        fn trapezoid_exact_on_affine(a in -5.0..5.0f64, b in -5.0..5.0f64, n in 1usize..40) {
            let v = quad(|x| a * x + b, 0.0, 2.0, QuadRule::Trapezoid, n).unwrap();
            let exact = 2.0 * a + 2.0 * b;
            prop_assert!((v - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }

        #[test]
        fn simpson_exact_on_cubics(c3 in -3.0..3.0f64, c2 in -3.0..3.0f64, c1 in -3.0..3.0f64, n in 1usize..30) {
            let v = quad(|x| c3 * x * x * x + c2 * x * x + c1 * x + 1.0, 0.0, 1.0, QuadRule::Simpson, n).unwrap();
            let exact = c3 / 4.0 + c2 / 3.0 + c1 / 2.0 + 1.0;
            prop_assert!((v - exact).abs() <= 1e-12 * (1.0 + exact.abs()));
        }
    }
}
