use super::{NumericsError, ODE_STEPS_PER_UNIT};

/// A function sampled on an increasing time grid, with piecewise-linear
/// evaluation between nodes.
#[derive(Debug, Clone)]
pub struct SampledFn {
    pub ts: Vec<f64>,
    pub vs: Vec<f64>,
}

impl SampledFn {
    pub fn new(ts: Vec<f64>, vs: Vec<f64>) -> Self {
        debug_assert_eq!(ts.len(), vs.len());
        debug_assert!(ts.windows(2).all(|w| w[1] > w[0]));
        Self { ts, vs }
    }

    pub fn constant(ts: Vec<f64>, v: f64) -> Self {
        let vs = vec![v; ts.len()];
        Self::new(ts, vs)
    }

    pub fn first_t(&self) -> f64 {
        self.ts[0]
    }

    pub fn last_t(&self) -> f64 {
        *self.ts.last().unwrap()
    }

    pub fn last_v(&self) -> f64 {
        *self.vs.last().unwrap()
    }

    /// Linear interpolation, clamped at the span ends.
    pub fn at(&self, t: f64) -> f64 {
        if t <= self.ts[0] {
            return self.vs[0];
        }
        let n = self.ts.len();
        if t >= self.ts[n - 1] {
            return self.vs[n - 1];
        }
        let i = match self
            .ts
            .binary_search_by(|v| v.partial_cmp(&t).expect("finite sample times"))
        {
            Ok(i) => return self.vs[i],
            Err(i) => i - 1,
        };
        let (t0, t1) = (self.ts[i], self.ts[i + 1]);
        let w = (t - t0) / (t1 - t0);
        self.vs[i] * (1.0 - w) + self.vs[i + 1] * w
    }
}

/// Classical fixed-step RK4 for the scalar initial value problem
/// `y' = rhs(t, y)`, `y(t0) = y0`, sampled uniformly on `[t0, t1]`.
///
/// Backward integration (`t1 < t0`) is allowed; the returned samples are
/// always in increasing time order. Global error is O(h^4) for smooth rhs.
pub fn ode_solve(
    rhs: impl Fn(f64, f64) -> f64,
    t0: f64,
    t1: f64,
    y0: f64,
) -> Result<SampledFn, NumericsError> {
    ode_solve_steps(rhs, t0, t1, y0, ((t1 - t0).abs() * ODE_STEPS_PER_UNIT).ceil() as usize)
}

/// As [`ode_solve`] with an explicit step count.
pub fn ode_solve_steps(
    rhs: impl Fn(f64, f64) -> f64,
    t0: f64,
    t1: f64,
    y0: f64,
    steps: usize,
) -> Result<SampledFn, NumericsError> {
    if t0 == t1 {
        return Err(NumericsError::DegenerateSpan(t0));
    }
    let n = steps.max(1);
    let h = (t1 - t0) / n as f64;
    let mut ts = Vec::with_capacity(n + 1);
    let mut vs = Vec::with_capacity(n + 1);
    let mut t = t0;
    let mut y = y0;
    ts.push(t);
    vs.push(y);
    for k in 0..n {
        y = rk4_step(&rhs, t, y, h)?;
        t = t0 + h * (k + 1) as f64;
        if !y.is_finite() {
            return Err(NumericsError::NonFinite { context: "ode_solve state", t });
        }
        if y.abs() > 1e154 {
            return Err(NumericsError::OdeBlowUp(t));
        }
        ts.push(t);
        vs.push(y);
    }
    if t1 < t0 {
        ts.reverse();
        vs.reverse();
    }
    Ok(SampledFn::new(ts, vs))
}

pub(crate) fn rk4_step(
    rhs: &impl Fn(f64, f64) -> f64,
    t: f64,
    y: f64,
    h: f64,
) -> Result<f64, NumericsError> {
    let k1 = rhs(t, y);
    let k2 = rhs(t + 0.5 * h, y + 0.5 * h * k1);
    let k3 = rhs(t + 0.5 * h, y + 0.5 * h * k2);
    let k4 = rhs(t + h, y + h * k3);
    let out = y + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    if !out.is_finite() {
        return Err(NumericsError::NonFinite { context: "ode_solve rhs", t });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_field_stays_constant() {
        let s = ode_solve(|_, _| 0.0, 0.0, 1.0, 5.0).unwrap();
        assert_eq!(s.last_v(), 5.0);
        assert_eq!(s.at(0.42), 5.0);
    }

    #[test]
    fn unit_slope() {
        let s = ode_solve(|_, _| 1.0, 0.0, 2.0, 0.0).unwrap();
        assert!((s.last_v() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exponential_oracle_at_h_1e3() {
        // y' = y, y(0) = 1  =>  y(1) = e, h = 1e-3
        let s = ode_solve_steps(|_, y| y, 0.0, 1.0, 1.0, 1000).unwrap();
        assert!((s.last_v() - std::f64::consts::E).abs() < 1e-8);
    }

    #[test]
    fn backward_integration() {
        // y' = y backward from y(1) = e should land on y(0) = 1.
        let s = ode_solve_steps(|_, y| y, 1.0, 0.0, std::f64::consts::E, 1000).unwrap();
        assert_eq!(s.first_t(), 0.0);
        assert!((s.vs[0] - 1.0).abs() < 1e-8);
    }

    #[test]
    fn halving_step_reduces_error_fourth_order() {
        let exact = std::f64::consts::E;
        let e1 = (ode_solve_steps(|_, y| y, 0.0, 1.0, 1.0, 64).unwrap().last_v() - exact).abs();
        let e2 = (ode_solve_steps(|_, y| y, 0.0, 1.0, 1.0, 128).unwrap().last_v() - exact).abs();
        assert!(e1 / e2 >= 12.0, "observed ratio {}", e1 / e2);
    }

    #[test]
    fn nan_rhs_is_diagnosed() {
        let r = ode_solve_steps(|t, _| if t > 0.5 { f64::NAN } else { 1.0 }, 0.0, 1.0, 0.0, 16);
        assert!(r.is_err());
    }

    #[test]
    fn blow_up_is_diagnosed() {
        let r = ode_solve_steps(|_, y| y * y, 0.0, 10.0, 10.0, 64);
        assert!(r.is_err());
    }
}
