//! Individual-level flow along growth characteristics.
//!
//! Given a resource trajectory `S`, an individual of size `xi` at time `s`
//! grows along `dx/dtau = g(x, S(tau))`. This module computes the size flow
//! `X_S(t, s, xi)`, the inverse birth-time map `T_S(x_b, x, t)`, the survival
//! probability `F_S(t, s, xi) = exp(-int mu)` and the reproduction and
//! consumption kernels built from them. Survival exponents and the flow
//! Jacobian `exp(int D1 g)` are integrated as companion variables of the same
//! RK4 pass, never by numerical differentiation of the flow.

use thiserror::Error;

use crate::ingredients::ModelIngredients;
use crate::numerics::{Grid1D, NumericsError, SampledFn, ODE_STEPS_PER_UNIT};

#[derive(Debug, Clone, Error)]
pub enum CharacteristicsError {
    #[error("time {needed} outside the environment span [{lo}, {hi}]; extend the trajectory")]
    OutOfSpan { needed: f64, lo: f64, hi: f64 },
    #[error("backward flow reached the birth size x_b at time {hit_time} before the target time")]
    HitBirthSize { hit_time: f64 },
    #[error("start size {xi} below the birth size {x_b}")]
    BelowBirthSize { xi: f64, x_b: f64 },
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// Resource concentration sampled on a time grid (which may start at
/// negative times), interpolated piecewise-linearly and clamped at the ends.
#[derive(Debug, Clone)]
pub struct EnvironmentTrajectory {
    pub t_grid: Grid1D,
    pub values: Vec<f64>,
}

impl EnvironmentTrajectory {
    pub fn new(t_grid: Grid1D, values: Vec<f64>) -> Result<Self, CharacteristicsError> {
        assert_eq!(t_grid.len(), values.len(), "one resource value per time node");
        for (i, &v) in values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(CharacteristicsError::Numerics(NumericsError::NonFinite {
                    context: "environment values must be finite and nonnegative",
                    t: t_grid.nodes()[i],
                }));
            }
        }
        Ok(Self { t_grid, values })
    }

    pub fn constant(t0: f64, t1: f64, value: f64) -> Self {
        let grid = Grid1D::uniform(t0, t1, 2, 0.0).expect("t1 > t0");
        Self { t_grid: grid, values: vec![value; 2] }
    }

    pub fn from_fn(t0: f64, t1: f64, n_nodes: usize, f: impl Fn(f64) -> f64) -> Result<Self, CharacteristicsError> {
        let grid = Grid1D::uniform(t0, t1, n_nodes, 0.0).map_err(CharacteristicsError::Numerics)?;
        let values = grid.nodes().iter().map(|&t| f(t)).collect();
        Self::new(grid, values)
    }

    pub fn at(&self, t: f64) -> f64 {
        self.t_grid.interp(&self.values, t)
    }

    pub fn span(&self) -> (f64, f64) {
        self.t_grid.span()
    }

    fn check_span(&self, lo: f64, hi: f64) -> Result<(), CharacteristicsError> {
        let (a, b) = self.span();
        let slack = 1e-9 * (1.0 + (b - a).abs());
        if lo < a - slack {
            return Err(CharacteristicsError::OutOfSpan { needed: lo, lo: a, hi: b });
        }
        if hi > b + slack {
            return Err(CharacteristicsError::OutOfSpan { needed: hi, lo: a, hi: b });
        }
        Ok(())
    }
}

/// One characteristic: sampled size and survival as functions of time.
#[derive(Debug, Clone)]
pub struct CharFlow {
    pub x_of_t: SampledFn,
    pub survival_of_t: SampledFn,
    pub span: (f64, f64),
    pub start_size: f64,
}

/// State carried along a characteristic: size, accumulated mortality
/// integral and accumulated `D1 g` integral (log of the flow Jacobian).
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct CharState {
    pub x: f64,
    pub imu: f64,
    pub idg: f64,
}

impl CharState {
    pub fn start(x: f64) -> Self {
        Self { x, imu: 0.0, idg: 0.0 }
    }
}

/// One RK4 step in time of `(x, int mu, int D1 g)` under resource `s_of_t`.
pub(crate) fn step_time(
    m: &ModelIngredients,
    s_of_t: &dyn Fn(f64) -> f64,
    tau: f64,
    st: CharState,
    h: f64,
    with_jacobian: bool,
) -> CharState {
    let deriv = |tau: f64, x: f64| -> (f64, f64, f64) {
        let s = s_of_t(tau);
        (
            m.growth(x, s),
            m.mortality(x, s),
            if with_jacobian { m.d1_growth(x, s) } else { 0.0 },
        )
    };
    let k1 = deriv(tau, st.x);
    let k2 = deriv(tau + 0.5 * h, st.x + 0.5 * h * k1.0);
    let k3 = deriv(tau + 0.5 * h, st.x + 0.5 * h * k2.0);
    let k4 = deriv(tau + h, st.x + h * k3.0);
    CharState {
        x: st.x + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        imu: st.imu + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        idg: st.idg + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
    }
}

/// One RK4 step in the size variable of `(t, int mu, int D1 g)`; valid
/// because `g >= g_min > 0` makes size a monotone clock.
pub(crate) fn step_size(
    m: &ModelIngredients,
    s_of_t: &dyn Fn(f64) -> f64,
    xi: f64,
    t: f64,
    imu: f64,
    idg: f64,
    h: f64,
) -> (f64, f64, f64) {
    let deriv = |xi: f64, t: f64| -> (f64, f64, f64) {
        let s = s_of_t(t);
        let g = m.growth(xi, s);
        (1.0 / g, m.mortality(xi, s) / g, m.d1_growth(xi, s) / g)
    };
    let k1 = deriv(xi, t);
    let k2 = deriv(xi + 0.5 * h, t + 0.5 * h * k1.0);
    let k3 = deriv(xi + 0.5 * h, t + 0.5 * h * k2.0);
    let k4 = deriv(xi + h, t + h * k3.0);
    (
        t + h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0),
        imu + h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1),
        idg + h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2),
    )
}

/// Endpoint of a flow integration.
#[derive(Debug, Clone, Copy)]
pub struct FlowPoint {
    /// Size at the target time.
    pub x: f64,
    /// `int_s^t mu(x(tau), S(tau)) dtau` (signed with the integration direction).
    pub imu: f64,
    /// `int_s^t D1 g(x(tau), S(tau)) dtau` (signed); `exp` of this is the
    /// Jacobian `D3 X_S(t, s, xi)`.
    pub idg: f64,
}

/// Integrate the characteristic from `(s, xi)` to time `t` (either
/// direction) with `n_steps` RK4 steps. A backward trajectory that crosses
/// the birth size raises [`CharacteristicsError::HitBirthSize`] carrying the
/// (bisected) hitting time.
pub fn integrate_flow(
    env: &EnvironmentTrajectory,
    t: f64,
    s: f64,
    xi: f64,
    m: &ModelIngredients,
    n_steps: usize,
) -> Result<FlowPoint, CharacteristicsError> {
    if xi < m.x_b - 1e-12 * (1.0 + m.x_b.abs()) {
        return Err(CharacteristicsError::BelowBirthSize { xi, x_b: m.x_b });
    }
    env.check_span(t.min(s), t.max(s))?;
    if t == s {
        return Ok(FlowPoint { x: xi, imu: 0.0, idg: 0.0 });
    }
    let s_of_t = |tau: f64| env.at(tau);
    let n = n_steps.max(1);
    let h = (t - s) / n as f64;
    let backward = h < 0.0;
    let mut st = CharState::start(xi);
    let mut tau = s;
    for k in 0..n {
        let next = step_time(m, &s_of_t, tau, st, h, true);
        if backward && next.x < m.x_b {
            let hit = bisect_hit(m, &s_of_t, tau, st, h);
            return Err(CharacteristicsError::HitBirthSize { hit_time: hit });
        }
        st = next;
        tau = s + h * (k + 1) as f64;
        if !st.x.is_finite() {
            return Err(CharacteristicsError::Numerics(NumericsError::NonFinite {
                context: "characteristic flow",
                t: tau,
            }));
        }
    }
    Ok(FlowPoint { x: st.x, imu: st.imu, idg: st.idg })
}

/// Find (by bisection on the step fraction) the time within one RK4 step at
/// which the backward trajectory crosses `x_b`.
fn bisect_hit(
    m: &ModelIngredients,
    s_of_t: &dyn Fn(f64) -> f64,
    tau: f64,
    st: CharState,
    h: f64,
) -> f64 {
    let mut lo = 0.0; // fraction of step where x >= x_b
    let mut hi = 1.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        let trial = step_time(m, s_of_t, tau, st, h * mid, false);
        if trial.x < m.x_b {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    tau + h * 0.5 * (lo + hi)
}

fn default_flow_steps(t: f64, s: f64) -> usize {
    (((t - s).abs() * ODE_STEPS_PER_UNIT).ceil() as usize).max(4)
}

/// `X_S(t, s, xi)`: size at time `t` of an individual of size `xi` at time `s`.
pub fn flow_size(
    env: &EnvironmentTrajectory,
    t: f64,
    s: f64,
    xi: f64,
    m: &ModelIngredients,
) -> Result<f64, CharacteristicsError> {
    Ok(integrate_flow(env, t, s, xi, m, default_flow_steps(t, s))?.x)
}

/// The whole characteristic between `s` and `t >= s` with sampled size and
/// survival, for inspection and validation.
pub fn flow_detailed(
    env: &EnvironmentTrajectory,
    t: f64,
    s: f64,
    xi: f64,
    m: &ModelIngredients,
    n_steps: usize,
) -> Result<CharFlow, CharacteristicsError> {
    assert!(t > s, "flow_detailed expects a forward span");
    env.check_span(s, t)?;
    let s_of_t = |tau: f64| env.at(tau);
    let n = n_steps.max(2);
    let h = (t - s) / n as f64;
    let mut st = CharState::start(xi);
    let mut ts = Vec::with_capacity(n + 1);
    let mut xs = Vec::with_capacity(n + 1);
    let mut su = Vec::with_capacity(n + 1);
    ts.push(s);
    xs.push(xi);
    su.push(1.0);
    for k in 0..n {
        st = step_time(m, &s_of_t, s + h * k as f64, st, h, false);
        ts.push(s + h * (k + 1) as f64);
        xs.push(st.x);
        su.push((-st.imu).exp());
    }
    Ok(CharFlow {
        x_of_t: SampledFn::new(ts.clone(), xs),
        survival_of_t: SampledFn::new(ts, su),
        span: (s, t),
        start_size: xi,
    })
}

/// Endpoint of a backward-in-size integration: the birth time and the
/// mortality / `D1 g` integrals accumulated from birth up to the anchor time.
#[derive(Debug, Clone, Copy)]
pub struct BirthPoint {
    /// `T_S(x_b, x, t)`: the time at which the individual had size `x_b`.
    pub theta: f64,
    /// `int_theta^t mu dtau` along the characteristic (nonnegative).
    pub imu: f64,
    /// `int_theta^t D1 g dtau` along the characteristic.
    pub idg: f64,
}

impl BirthPoint {
    /// Survival from birth to the anchor time, `F_S(t, theta, x_b)`.
    pub fn survival(&self) -> f64 {
        (-self.imu).exp()
    }

    /// `-D2 T_S(x_b, x, t) = exp(-int D1 g) / g(x_b, S(theta))`: the density
    /// change-of-variables factor of the newborn branch.
    pub fn neg_d2t(&self, env: &EnvironmentTrajectory, m: &ModelIngredients) -> f64 {
        (-self.idg).exp() / m.growth(m.x_b, env.at(self.theta))
    }
}

/// `T_S(x_b, x, t)` with companions, integrating `dt/dxi = 1/g` backward in
/// size from `(x, t)` to the birth size.
pub fn birth_time_detailed(
    env: &EnvironmentTrajectory,
    x: f64,
    t: f64,
    m: &ModelIngredients,
    n_steps: usize,
) -> Result<BirthPoint, CharacteristicsError> {
    if x < m.x_b - 1e-12 * (1.0 + m.x_b.abs()) {
        return Err(CharacteristicsError::BelowBirthSize { xi: x, x_b: m.x_b });
    }
    env.check_span(t, t)?;
    if x <= m.x_b {
        return Ok(BirthPoint { theta: t, imu: 0.0, idg: 0.0 });
    }
    let s_of_t = |tau: f64| env.at(tau);
    let n = n_steps.max(2);
    let h = -(x - m.x_b) / n as f64;
    let (lo_span, _) = env.span();
    let slack = 1e-9 * (1.0 + env.span().1 - lo_span);
    let mut xi = x;
    let mut ti = t;
    let mut imu = 0.0;
    let mut idg = 0.0;
    for k in 0..n {
        let (t2, imu2, idg2) = step_size(m, &s_of_t, xi, ti, imu, idg, h);
        xi = x + h * (k + 1) as f64;
        ti = t2;
        imu = imu2;
        idg = idg2;
        if ti < lo_span - slack {
            return Err(CharacteristicsError::OutOfSpan {
                needed: ti,
                lo: lo_span,
                hi: env.span().1,
            });
        }
        if !ti.is_finite() {
            return Err(CharacteristicsError::Numerics(NumericsError::NonFinite {
                context: "birth time integration",
                t: xi,
            }));
        }
    }
    // integration ran backward, so the accumulated integrals are negative
    // of the forward ones
    Ok(BirthPoint { theta: ti, imu: -imu, idg: -idg })
}

fn default_birth_steps(x: f64, m: &ModelIngredients) -> usize {
    ((((x - m.x_b) / m.g_min) * ODE_STEPS_PER_UNIT).ceil() as usize).max(4)
}

/// `T_S(x_b, x, t)`: the birth time of an individual of size `x` at time `t`.
pub fn birth_time(
    env: &EnvironmentTrajectory,
    x: f64,
    t: f64,
    m: &ModelIngredients,
) -> Result<f64, CharacteristicsError> {
    Ok(birth_time_detailed(env, x, t, m, default_birth_steps(x, m))?.theta)
}

/// `F_S(t, s, xi)`: survival probability from `s` to `t >= s`.
pub fn survival(
    env: &EnvironmentTrajectory,
    t: f64,
    s: f64,
    xi: f64,
    m: &ModelIngredients,
) -> Result<f64, CharacteristicsError> {
    debug_assert!(t >= s, "survival expects t >= s");
    Ok((-integrate_flow(env, t, s, xi, m, default_flow_steps(t, s))?.imu).exp())
}

/// Expected contribution to the birth rate at `t` of an individual of size
/// `xi` at time `s`: `beta(X_S(t,s,xi), S(t)) * F_S(t,s,xi)`.
pub fn kernel_beta(
    env: &EnvironmentTrajectory,
    t: f64,
    s: f64,
    xi: f64,
    m: &ModelIngredients,
) -> Result<f64, CharacteristicsError> {
    debug_assert!(t >= s);
    let p = integrate_flow(env, t, s, xi, m, default_flow_steps(t, s))?;
    Ok(m.fecundity(p.x, env.at(t)) * (-p.imu).exp())
}

/// Expected resource consumption rate at `t` of an individual of size `xi`
/// at time `s`: `gamma(X_S(t,s,xi), S(t)) * F_S(t,s,xi)`.
pub fn kernel_gamma(
    env: &EnvironmentTrajectory,
    t: f64,
    s: f64,
    xi: f64,
    m: &ModelIngredients,
) -> Result<f64, CharacteristicsError> {
    debug_assert!(t >= s);
    let p = integrate_flow(env, t, s, xi, m, default_flow_steps(t, s))?;
    Ok(m.consumption(p.x, env.at(t)) * (-p.imu).exp())
}
