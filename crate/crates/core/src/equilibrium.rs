//! Positive steady states `(n*, S*)` / `(b*, S*)`.
//!
//! At constant resource `S` the expected lifetime offspring of a newborn is
//!
//! ```text
//! R(S) = int_{x_b}^inf beta(x,S)/g(x,S) * exp(-int_{x_b}^x mu(y,S)/g(y,S) dy) dx
//! ```
//!
//! A positive steady state requires `R(S*) = 1`; the steady birth rate then
//! balances resource production against the expected lifetime consumption of
//! a newborn, and the steady density follows in closed form.

use thiserror::Error;

use crate::ingredients::ModelIngredients;
use crate::numerics::{find_root_bracketed, Grid1D, NumericsError, ToleranceSet};

#[derive(Debug, Clone, Error)]
pub enum EquilibriumError {
    #[error("no sign change of R(S) - 1 found on the scan ladder up to S = {s_upper}; R there is {r_at_upper}. A positive steady state needs the invasion condition R(S0) > 1 at a resource-only steady state S0")]
    NoBracket { s_upper: f64, r_at_upper: f64 },
    #[error("reproduction-number tail bound {tail} still exceeds the budget {budget} at x_max = {x_max}; ingredients decay too slowly")]
    TailBudget { tail: f64, budget: f64, x_max: f64 },
    #[error("no resource-only steady state found: f has no stable zero on (0, {0}]")]
    NoVirginState(f64),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// A positive steady state with its diagnostics.
#[derive(Debug, Clone)]
pub struct SteadyState {
    pub s_star: f64,
    pub b_star: f64,
    /// Steady density sampled on `x_grid`.
    pub n_star: Vec<f64>,
    pub x_grid: Grid1D,
    /// `R(S*)`, approximately 1.
    pub r_value: f64,
    /// Expected lifetime resource consumption of a newborn at `S*`.
    pub lifetime_consumption: f64,
    /// Set when `f(S*) = 0` forces `b* = 0` (no consumers).
    pub degenerate: bool,
}

/// Default number of RK4 steps for the size-form integrals.
const SIZE_STEPS: usize = 8192;
/// Hard cap on the integration span, in units of `g_max / mu_hat`.
const SPAN_CAP: f64 = 200.0;

/// Integrate `(M, R, L)` with `M' = mu/g`, `R' = (beta/g) e^{-M}`,
/// `L' = (gamma/g) e^{-M}` from `x_b` until the analytic tail bound drops
/// below `rel_tol` (relative), returning `(R, L, tail_bound, x_max)`.
fn life_integrals(
    s: f64,
    m: &ModelIngredients,
    rel_tol: f64,
) -> Result<(f64, f64, f64, f64), EquilibriumError> {
    // tail factor: e^{-M(z)} <= e^{-M(x)} C e^{-mu_hat (z-x)/g_max}
    let c_upper = m.sigma_integral.map(|si| si.exp()).unwrap_or(1.0);
    let rate_sup = m.beta_sup.max(m.gamma_sup).max(1e-300);
    let tail_bound = |m_val: f64| {
        (rate_sup / m.g_min) * (-m_val).exp() * c_upper * m.g_max / m.mu_hat
    };
    let span_unit = m.g_max / m.mu_hat;
    let h = span_unit * 26.0 / SIZE_STEPS as f64;
    let deriv = |x: f64, mm: f64| -> (f64, f64, f64) {
        let g = m.growth(x, s);
        let e = (-mm).exp();
        (m.mortality(x, s) / g, m.fecundity(x, s) / g * e, m.consumption(x, s) / g * e)
    };
    let mut x = m.x_b;
    let mut mv = 0.0;
    let mut rv = 0.0;
    let mut lv = 0.0;
    let x_cap = m.x_b + SPAN_CAP * span_unit;
    loop {
        // one RK4 step of the coupled system
        let k1 = deriv(x, mv);
        let k2 = deriv(x + 0.5 * h, mv + 0.5 * h * k1.0);
        let k3 = deriv(x + 0.5 * h, mv + 0.5 * h * k2.0);
        let k4 = deriv(x + h, mv + h * k3.0);
        mv += h / 6.0 * (k1.0 + 2.0 * k2.0 + 2.0 * k3.0 + k4.0);
        rv += h / 6.0 * (k1.1 + 2.0 * k2.1 + 2.0 * k3.1 + k4.1);
        lv += h / 6.0 * (k1.2 + 2.0 * k2.2 + 2.0 * k3.2 + k4.2);
        x += h;
        let tb = tail_bound(mv);
        if x >= m.x_bar && tb <= rel_tol * rv.max(lv).max(1e-12) {
            return Ok((rv, lv, tb, x));
        }
        if x > x_cap {
            return Err(EquilibriumError::TailBudget {
                tail: tb,
                budget: rel_tol * rv.max(lv).max(1e-12),
                x_max: x,
            });
        }
    }
}

/// `R(S)`: expected number of offspring produced by a newborn at constant
/// resource `S`.
pub fn reproduction_number(s: f64, m: &ModelIngredients) -> Result<f64, EquilibriumError> {
    Ok(life_integrals(s, m, 1e-12)?.0)
}

/// Expected lifetime resource consumption of a newborn at constant `S`.
pub fn lifetime_consumption(s: f64, m: &ModelIngredients) -> Result<f64, EquilibriumError> {
    Ok(life_integrals(s, m, 1e-12)?.1)
}

/// Steady density profile `n*(x) = (b*/g(x,S*)) exp(-int mu/g)` sampled on
/// `grid` (one integration pass with RK4 substeps between nodes).
pub fn steady_density_profile(
    m: &ModelIngredients,
    s_star: f64,
    b_star: f64,
    grid: &Grid1D,
) -> Vec<f64> {
    let nodes = grid.nodes();
    let mut out = Vec::with_capacity(nodes.len());
    let mut mv = 0.0;
    // M(x_b .. first node) when the grid does not start at x_b
    let mut prev = m.x_b;
    for &x in nodes {
        if x > prev {
            let sub = (((x - prev) / (m.g_min / 64.0)).ceil() as usize).clamp(4, 4096);
            let h = (x - prev) / sub as f64;
            for q in 0..sub {
                let xq = prev + h * q as f64;
                let d = |y: f64| {
                    let g = m.growth(y, s_star);
                    m.mortality(y, s_star) / g
                };
                let k1 = d(xq);
                let k2 = d(xq + 0.5 * h);
                let k4 = d(xq + h);
                mv += h / 6.0 * (k1 + 4.0 * k2 + k4);
            }
        }
        out.push(b_star / m.growth(x, s_star) * (-mv).exp());
        prev = x;
    }
    out
}

/// Solve `R(S*) = 1` on a sign-changing bracket and assemble the steady
/// state on `x_grid`.
pub fn solve_steady(
    m: &ModelIngredients,
    bracket: (f64, f64),
    x_grid: &Grid1D,
    tol: &ToleranceSet,
) -> Result<SteadyState, EquilibriumError> {
    let obj = |s: f64| reproduction_number(s, m).map(|r| r - 1.0);
    let f_lo = obj(bracket.0)?;
    let f_hi = obj(bracket.1)?;
    if f_lo * f_hi > 0.0 {
        return Err(EquilibriumError::NoBracket {
            s_upper: bracket.1,
            r_at_upper: f_hi + 1.0,
        });
    }
    let s_star = find_root_bracketed(
        |s| reproduction_number(s, m).map(|r| r - 1.0).unwrap_or(f64::NAN),
        bracket.0,
        bracket.1,
        tol.root_tol,
        tol.max_iter,
    )?;
    let (r_value, ltc, _, _) = life_integrals(s_star, m, 1e-12)?;
    let fs = m.resource_rate(s_star);
    let degenerate = fs.abs() <= tol.root_tol;
    let b_star = if degenerate { 0.0 } else { fs / ltc };
    let n_star = steady_density_profile(m, s_star, b_star, x_grid);
    Ok(SteadyState {
        s_star,
        b_star,
        n_star,
        x_grid: x_grid.clone(),
        r_value,
        lifetime_consumption: ltc,
        degenerate,
    })
}

/// Resource-only steady state: the largest stable zero of `f` on `(0, cap]`.
pub fn virgin_resource_state(m: &ModelIngredients, cap: f64) -> Result<f64, EquilibriumError> {
    let n = 512;
    let mut best: Option<f64> = None;
    let mut prev_s = cap * 1e-6;
    let mut prev_f = m.resource_rate(prev_s);
    for i in 1..=n {
        let s = cap * 1e-6 + (cap - cap * 1e-6) * i as f64 / n as f64;
        let fs = m.resource_rate(s);
        if prev_f == 0.0 && prev_f <= fs {
            // touching zero from below is not a stable crossing
        } else if prev_f > 0.0 && fs <= 0.0 {
            // downward crossing: stable zero inside
            let z = find_root_bracketed(
                |v| m.resource_rate(v),
                prev_s,
                s,
                1e-12,
                200,
            )?;
            best = Some(z);
        }
        prev_s = s;
        prev_f = fs;
    }
    // f positive all the way up to cap: treat cap itself as the supply level
    if best.is_none() && m.resource_rate(cap) > 0.0 {
        return Ok(cap);
    }
    best.ok_or(EquilibriumError::NoVirginState(cap))
}

/// Scan a log-spaced ladder on `(0, s_upper]` and return one steady state per
/// sign-change bracket of `R(S) - 1` (non-monotone `R` can have several).
pub fn find_steady_states(
    m: &ModelIngredients,
    x_grid: &Grid1D,
    tol: &ToleranceSet,
) -> Result<Vec<SteadyState>, EquilibriumError> {
    let s_upper = virgin_resource_state(m, 10.0 / m.lipschitz.map(|t| t.f).unwrap_or(1.0).max(0.1))?;
    let n = 64;
    let lo = s_upper * 1e-6;
    let ratio = (s_upper / lo).powf(1.0 / (n - 1) as f64);
    let mut out = Vec::new();
    let mut prev_s = lo;
    let mut prev_v = reproduction_number(prev_s, m)? - 1.0;
    let mut r_at_upper = prev_v + 1.0;
    for i in 1..n {
        let s = lo * ratio.powi(i);
        let v = reproduction_number(s, m)? - 1.0;
        r_at_upper = v + 1.0;
        if prev_v * v <= 0.0 && (prev_v != 0.0 || v != 0.0) {
            out.push(solve_steady(m, (prev_s, s), x_grid, tol)?);
        }
        prev_s = s;
        prev_v = v;
    }
    if out.is_empty() {
        return Err(EquilibriumError::NoBracket { s_upper, r_at_upper });
    }
    Ok(out)
}

/// Invasion condition at a virgin resource level.
#[derive(Debug, Clone, Copy)]
pub struct InvasionReport {
    pub invades: bool,
    pub r_value: f64,
    /// `R(S0)` within 10 root tolerances of 1.
    pub on_boundary: bool,
    /// Set when `f(S0)` is not approximately zero (S0 is then not a
    /// resource-only steady state and the conclusion is heuristic).
    pub not_virgin: bool,
}

/// `true` iff `R(S0) > 1`: the consumer grows when introduced into the
/// virgin environment `S0`.
pub fn invasion_check(
    m: &ModelIngredients,
    s0: f64,
    tol: &ToleranceSet,
) -> Result<InvasionReport, EquilibriumError> {
    let r = reproduction_number(s0, m)?;
    let on_boundary = (r - 1.0).abs() <= 10.0 * tol.root_tol;
    Ok(InvasionReport {
        invades: r > 1.0 && !on_boundary,
        r_value: r,
        on_boundary,
        not_virgin: m.resource_rate(s0).abs() > 1e-6 * (1.0 + s0.abs()),
    })
}
