//! The density-side semigroup.
//!
//! From an initial pair `(n0, S0)` the solver constructs the resource
//! trajectory `S` as the fixed point of
//!
//! ```text
//! V(S)(t) = S0 + int_0^t ( f(S) - int_0^tau gamma_S(tau, tau-a) b_S(tau-a) da - k_S(tau) ) dtau
//! ```
//!
//! by damped Picard iteration, recomputing on every iterate the birth rate
//! `b_S` from the renewal equation
//!
//! ```text
//! b(t) = int_0^t beta_S(t, t-a) b(t-a) da + h_S(t)
//! ```
//!
//! by trapezoidal time marching. Long horizons are split into unit windows
//! with the iteration restarted per window (the map is causal, so converged
//! windows stay fixed). The new density is then assembled from the two
//! branches of the explicit characteristic solution.

use thiserror::Error;

use crate::characteristics::{self, CharState, CharacteristicsError, EnvironmentTrajectory};
use crate::ingredients::{IngredientsError, ModelIngredients};
use crate::numerics::{Grid1D, NumericsError, SampledFn, ToleranceSet};

#[derive(Debug, Clone, Error)]
pub enum EngineError {
    #[error("picard iteration did not converge in window {window}: residual history {history:?}")]
    PicardDiverged { window: usize, history: Vec<f64> },
    #[error("resource iterate went negative ({value} at t = {t}) and damping did not recover")]
    NegativeResource { t: f64, value: f64 },
    #[error("weighted tail {tail} exceeds budget {budget}; enlarge x_max")]
    TailBudget { tail: f64, budget: f64 },
    #[error("density values must be finite and nonnegative (index {0})")]
    BadDensity(usize),
    #[error(transparent)]
    Characteristics(#[from] CharacteristicsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
    #[error(transparent)]
    Ingredients(#[from] IngredientsError),
}

/// Density-side state: a size density on a truncated weighted grid plus the
/// scalar resource concentration.
#[derive(Debug, Clone)]
pub struct DensityState {
    /// Size grid on `[x_b, x_max]`; its `weight_exponent` is `kappa0`.
    pub x_grid: Grid1D,
    pub n_values: Vec<f64>,
    pub s0: f64,
    pub kappa0: f64,
    /// Declared weighted mass beyond `x_max` (bound, not sample).
    pub tail_mass: f64,
}

impl DensityState {
    pub fn new(
        x_grid: Grid1D,
        n_values: Vec<f64>,
        s0: f64,
        kappa0: f64,
        tail_mass: f64,
    ) -> Result<Self, EngineError> {
        assert_eq!(x_grid.len(), n_values.len());
        for (i, &v) in n_values.iter().enumerate() {
            if !v.is_finite() || v < 0.0 {
                return Err(EngineError::BadDensity(i));
            }
        }
        Ok(Self { x_grid, n_values, s0, kappa0, tail_mass })
    }

    /// `int |n| e^{kappa0 x} dx` over the grid plus the declared tail.
    pub fn weighted_norm(&self) -> f64 {
        let vals: Vec<f64> = self.n_values.iter().map(|v| v.abs()).collect();
        self.x_grid.weighted_trapezoid(&vals, self.kappa0) + self.tail_mass
    }

    /// Full state norm `||n||_{kappa0} + |S0|`.
    pub fn state_norm(&self) -> f64 {
        self.weighted_norm() + self.s0.abs()
    }
}

/// Weighted distance `||n1 - n2||_{kappa0} + |S1 - S2|` between two states
/// (resampled linearly onto the union of their grids; tail bounds add).
pub fn state_distance(a: &DensityState, b: &DensityState) -> f64 {
    let kappa0 = a.kappa0;
    let mut nodes: Vec<f64> = a
        .x_grid
        .nodes()
        .iter()
        .chain(b.x_grid.nodes())
        .copied()
        .collect();
    nodes.sort_by(|p, q| p.partial_cmp(q).unwrap());
    nodes.dedup();
    let av = |x: f64| -> f64 {
        if x > a.x_grid.last() { 0.0 } else { a.x_grid.interp(&a.n_values, x) }
    };
    let bv = |x: f64| -> f64 {
        if x > b.x_grid.last() { 0.0 } else { b.x_grid.interp(&b.n_values, x) }
    };
    let mut acc = 0.0;
    for w in nodes.windows(2) {
        let f0 = (av(w[0]) - bv(w[0])).abs() * (kappa0 * w[0]).exp();
        let f1 = (av(w[1]) - bv(w[1])).abs() * (kappa0 * w[1]).exp();
        acc += 0.5 * (w[1] - w[0]) * (f0 + f1);
    }
    acc + (a.tail_mass - b.tail_mass).abs() + (a.s0 - b.s0).abs()
}

/// Constructed `(b, S)` pair on `[0, T]` plus the reconstructed final density.
#[derive(Debug, Clone)]
pub struct SolutionBundle {
    pub env: EnvironmentTrajectory,
    pub birth: SampledFn,
    /// Total consumption rate (memory integral plus founder term) at each node.
    pub consumption: SampledFn,
    pub n_final: DensityState,
    pub picard_iterations: usize,
    pub picard_residual: f64,
}

/// Time discretisation of the marching scheme. The characteristic substep
/// `dt / substeps` is the RK4 step; the default matches the tolerance
/// profile's step density of 2048 per unit time.
#[derive(Debug, Clone, Copy)]
pub struct TimeDisc {
    pub dt: f64,
    pub substeps: usize,
    /// Weighted-tail budget relative to the state norm.
    pub tail_tol: f64,
}

impl Default for TimeDisc {
    fn default() -> Self {
        Self { dt: 1.0 / 256.0, substeps: 8, tail_tol: 1e-8 }
    }
}

impl TimeDisc {
    pub fn with_dt(dt: f64) -> Self {
        let substeps = ((dt * 2048.0).round() as usize).max(1);
        Self { dt, substeps, tail_tol: 1e-8 }
    }
}

/// Quadrature weights for a size grid: composite Simpson when the grid is
/// uniform with an even interval count, trapezoid otherwise.
pub(crate) fn size_quad_weights(grid: &Grid1D) -> Vec<f64> {
    let nodes = grid.nodes();
    let n = nodes.len() - 1;
    let h = (grid.last() - grid.first()) / n as f64;
    let uniform = nodes
        .windows(2)
        .all(|w| ((w[1] - w[0]) - h).abs() <= 1e-9 * h);
    if uniform && n >= 2 && n % 2 == 0 {
        crate::numerics::quad::simpson_weights(n, h)
    } else {
        grid.trapezoid_weights()
    }
}

/// Expected birth-rate contribution at time `t` of the founder population:
/// `int n0(xi) beta(X_S(t,0,xi), S(t)) F_S(t,0,xi) dxi`.
pub fn forcing_h(
    state: &DensityState,
    env: &EnvironmentTrajectory,
    t: f64,
    m: &ModelIngredients,
) -> Result<f64, EngineError> {
    founder_integral(state, env, t, m, false)
}

/// Founder consumption rate `k_S(t)`; as [`forcing_h`] with `gamma`.
pub fn forcing_k(
    state: &DensityState,
    env: &EnvironmentTrajectory,
    t: f64,
    m: &ModelIngredients,
) -> Result<f64, EngineError> {
    founder_integral(state, env, t, m, true)
}

fn founder_integral(
    state: &DensityState,
    env: &EnvironmentTrajectory,
    t: f64,
    m: &ModelIngredients,
    consumption: bool,
) -> Result<f64, EngineError> {
    let w = size_quad_weights(&state.x_grid);
    let s_t = env.at(t);
    let mut acc = 0.0;
    let steps = ((t * 2048.0).ceil() as usize).max(4);
    for (k, &xi) in state.x_grid.nodes().iter().enumerate() {
        if state.n_values[k] == 0.0 {
            continue;
        }
        let p = if t == 0.0 {
            characteristics::FlowPoint { x: xi, imu: 0.0, idg: 0.0 }
        } else {
            characteristics::integrate_flow(env, t, 0.0, xi, m, steps)?
        };
        let rate = if consumption { m.consumption(p.x, s_t) } else { m.fecundity(p.x, s_t) };
        acc += w[k] * state.n_values[k] * rate * (-p.imu).exp();
    }
    Ok(acc)
}

// ---------------------------------------------------------------------------
// constructive core: rolled characteristics + Volterra march per window
// ---------------------------------------------------------------------------

struct Workspace {
    /// One characteristic per time node, born at `(t_j, x_b)`; index j.
    kernel_states: Vec<CharState>,
    /// One characteristic per size node, born at `(0, xi_k)`.
    founder_states: Vec<CharState>,
}

pub(crate) struct ConstructiveRun {
    pub ts: Vec<f64>,
    pub s_vals: Vec<f64>,
    pub b_vals: Vec<f64>,
    pub cons_vals: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

fn interp_uniform(t0: f64, dt: f64, vals: &[f64], t: f64) -> f64 {
    let u = (t - t0) / dt;
    if u <= 0.0 {
        return vals[0];
    }
    let n = vals.len() - 1;
    if u >= n as f64 {
        return vals[n];
    }
    let i = u.floor() as usize;
    let w = u - i as f64;
    vals[i] * (1.0 - w) + vals[i + 1] * w
}

/// Advance a characteristic from node `i-1` to node `i` with RK4 substeps,
/// reading the resource from the current iterate.
fn advance(
    m: &ModelIngredients,
    st: &mut CharState,
    t_from: f64,
    dt: f64,
    substeps: usize,
    s_of_t: &dyn Fn(f64) -> f64,
) {
    let h = dt / substeps as f64;
    for q in 0..substeps {
        *st = characteristics::step_time(m, s_of_t, t_from + h * q as f64, *st, h, false);
    }
}

/// One causal sweep over the node range `[a, b]`: rolls the characteristics,
/// assembles the renewal forcing and kernel rows, marches the birth rate and
/// accumulates the consumption rate. Mutates the workspace states in place.
#[allow(clippy::too_many_arguments)]
fn sweep(
    m: &ModelIngredients,
    n0: &[f64],
    n0_weights: &[f64],
    ts: &[f64],
    s_vals: &[f64],
    b_vals: &mut [f64],
    cons_vals: &mut [f64],
    range: (usize, usize),
    ws: &mut Workspace,
    disc: &TimeDisc,
) -> Result<(), EngineError> {
    let (a, b) = range;
    let t0 = ts[0];
    let dt = disc.dt;
    let s_of_t = |tau: f64| interp_uniform(t0, dt, s_vals, tau);
    for i in a..=b {
        if i > a {
            // roll every live characteristic one node forward
            let t_from = ts[i - 1];
            for st in ws.founder_states.iter_mut() {
                advance(m, st, t_from, dt, disc.substeps, &s_of_t);
            }
            for st in ws.kernel_states[..i].iter_mut() {
                advance(m, st, t_from, dt, disc.substeps, &s_of_t);
            }
        }
        if ws.kernel_states.len() <= i {
            ws.kernel_states.push(CharState::start(m.x_b));
        } else if i >= a {
            // freshly born within this sweep
            ws.kernel_states[i] = CharState::start(m.x_b);
        }
        let s_i = s_vals[i];
        // founder terms h_S(t_i), k_S(t_i)
        let mut h_i = 0.0;
        let mut k_i = 0.0;
        for (k, st) in ws.founder_states.iter().enumerate() {
            if n0[k] == 0.0 {
                continue;
            }
            let surv = (-st.imu).exp();
            let wgt = n0_weights[k] * n0[k] * surv;
            h_i += wgt * m.fecundity(st.x, s_i);
            k_i += wgt * m.consumption(st.x, s_i);
        }
        // renewal march: trapezoid in the memory variable
        let mut acc_b = h_i;
        let mut acc_c = k_i;
        if i > 0 {
            for j in 0..i {
                let w = if j == 0 {
                    0.5 * (ts[1] - ts[0])
                } else {
                    0.5 * (ts[j + 1] - ts[j - 1])
                };
                let st = &ws.kernel_states[j];
                let surv = (-st.imu).exp();
                acc_b += w * m.fecundity(st.x, s_i) * surv * b_vals[j];
                acc_c += w * m.consumption(st.x, s_i) * surv * b_vals[j];
            }
            let wk = 0.5 * (ts[i] - ts[i - 1]);
            let diag = 1.0 - wk * m.fecundity(m.x_b, s_i);
            if diag <= 0.0 {
                return Err(EngineError::Numerics(NumericsError::GridTooCoarse {
                    index: i,
                    diag,
                }));
            }
            b_vals[i] = acc_b / diag;
            acc_c += wk * m.consumption(m.x_b, s_i) * b_vals[i];
        } else {
            b_vals[i] = acc_b;
        }
        cons_vals[i] = acc_c;
        if !b_vals[i].is_finite() {
            return Err(EngineError::Numerics(NumericsError::NonFinite {
                context: "birth rate march",
                t: ts[i],
            }));
        }
    }
    Ok(())
}

/// Picard fixed point of the resource map on `[0, horizon]`, windowed.
pub(crate) fn solve_constructive(
    state: &DensityState,
    horizon: f64,
    m: &ModelIngredients,
    tol: &ToleranceSet,
    disc: &TimeDisc,
) -> Result<ConstructiveRun, EngineError> {
    assert!(horizon > 0.0);
    let n_t = ((horizon / disc.dt).round() as usize).max(1);
    let dt = horizon / n_t as f64;
    let disc = TimeDisc { dt, ..*disc };
    let ts: Vec<f64> = (0..=n_t).map(|i| dt * i as f64).collect();
    let n0_weights = size_quad_weights(&state.x_grid);
    let n0 = &state.n_values;

    let mut s_vals = vec![state.s0; n_t + 1];
    let mut b_vals = vec![0.0; n_t + 1];
    let mut cons_vals = vec![0.0; n_t + 1];

    let mut frozen = Workspace {
        kernel_states: Vec::with_capacity(n_t + 1),
        founder_states: state.x_grid.nodes().iter().map(|&x| CharState::start(x)).collect(),
    };

    // convergence threshold sits well below picard_tol so that the reported
    // residual and the discrete resource-balance identity both clear it
    let thr = (tol.picard_tol * 1e-2).max(5e-14);
    let nodes_per_window = ((1.0 / dt).round() as usize).clamp(1, n_t);
    let mut window_start = 0usize;
    let mut total_iters = 0usize;
    let mut final_residual = 0.0f64;
    let mut window_index = 0usize;

    while window_start < n_t {
        let window_end = (window_start + nodes_per_window).min(n_t);
        let mut history = Vec::new();
        let mut prev_residual = f64::INFINITY;
        let mut negative_strikes = 0usize;
        let mut converged = false;
        for _ in 0..tol.max_iter {
            total_iters += 1;
            let mut ws = Workspace {
                kernel_states: frozen.kernel_states.clone(),
                founder_states: frozen.founder_states.clone(),
            };
            sweep(
                m,
                n0,
                &n0_weights,
                &ts,
                &s_vals,
                &mut b_vals,
                &mut cons_vals,
                (window_start, window_end),
                &mut ws,
                &disc,
            )?;
            // resource update: cumulative trapezoid of f(S) - consumption
            let mut s_new = vec![0.0; window_end - window_start + 1];
            s_new[0] = s_vals[window_start];
            for i in window_start + 1..=window_end {
                let f0 = m.resource_rate(s_vals[i - 1]) - cons_vals[i - 1];
                let f1 = m.resource_rate(s_vals[i]) - cons_vals[i];
                s_new[i - window_start] =
                    s_new[i - window_start - 1] + 0.5 * (ts[i] - ts[i - 1]) * (f0 + f1);
            }
            let mut residual = 0.0f64;
            let mut min_s = f64::INFINITY;
            for i in window_start..=window_end {
                residual = residual.max((s_new[i - window_start] - s_vals[i]).abs());
                min_s = min_s.min(s_new[i - window_start]);
            }
            history.push(residual);
            // plain iteration can transiently grow (contraction holds only in
            // an exponentially weighted norm), so damp on growth
            let damp = residual > prev_residual || min_s < -1e-8;
            if min_s < -1e-8 {
                negative_strikes += 1;
                if negative_strikes > 8 {
                    let (i_bad, v_bad) = (window_start..=window_end)
                        .map(|i| (i, s_new[i - window_start]))
                        .min_by(|a, b| a.1.partial_cmp(&b.1).unwrap())
                        .unwrap();
                    return Err(EngineError::NegativeResource { t: ts[i_bad], value: v_bad });
                }
            } else {
                negative_strikes = 0;
            }
            for i in window_start + 1..=window_end {
                let target = s_new[i - window_start];
                s_vals[i] = if damp { 0.5 * (s_vals[i] + target) } else { target };
            }
            prev_residual = residual;
            if residual <= thr {
                final_residual = residual;
                converged = true;
                break;
            }
        }
        if !converged {
            return Err(EngineError::PicardDiverged { window: window_index, history });
        }
        // roll the frozen prefix through the window with the converged
        // resource, making b, consumption and the characteristic states
        // consistent with it
        let mut ws = Workspace {
            kernel_states: frozen.kernel_states.clone(),
            founder_states: frozen.founder_states.clone(),
        };
        sweep(
            m,
            n0,
            &n0_weights,
            &ts,
            &s_vals,
            &mut b_vals,
            &mut cons_vals,
            (window_start, window_end),
            &mut ws,
            &disc,
        )?;
        frozen = ws;
        window_start = window_end;
        window_index += 1;
    }

    Ok(ConstructiveRun { ts, s_vals, b_vals, cons_vals, iterations: total_iters, residual: final_residual })
}

/// Birth rate on `[0, horizon]` for a *given* resource trajectory: one causal
/// sweep of the renewal march (no fixed-point iteration).
pub fn solve_birth(
    state: &DensityState,
    env: &EnvironmentTrajectory,
    horizon: f64,
    m: &ModelIngredients,
    disc: &TimeDisc,
) -> Result<SampledFn, EngineError> {
    assert!(horizon > 0.0);
    let n_t = ((horizon / disc.dt).round() as usize).max(1);
    let dt = horizon / n_t as f64;
    let disc = TimeDisc { dt, ..*disc };
    let ts: Vec<f64> = (0..=n_t).map(|i| dt * i as f64).collect();
    let s_vals: Vec<f64> = ts.iter().map(|&t| env.at(t)).collect();
    let n0_weights = size_quad_weights(&state.x_grid);
    let mut b_vals = vec![0.0; n_t + 1];
    let mut cons_vals = vec![0.0; n_t + 1];
    let mut ws = Workspace {
        kernel_states: Vec::with_capacity(n_t + 1),
        founder_states: state.x_grid.nodes().iter().map(|&x| CharState::start(x)).collect(),
    };
    sweep(
        m,
        &state.n_values,
        &n0_weights,
        &ts,
        &s_vals,
        &mut b_vals,
        &mut cons_vals,
        (0, n_t),
        &mut ws,
        &disc,
    )?;
    Ok(SampledFn::new(ts, b_vals))
}

/// Construct the full solution bundle on `[0, horizon]`: the resource fixed
/// point, the birth rate and the reconstructed density at the final time.
pub fn picard_resource(
    state: &DensityState,
    horizon: f64,
    m: &ModelIngredients,
    tol: &ToleranceSet,
    disc: &TimeDisc,
) -> Result<SolutionBundle, EngineError> {
    let run = solve_constructive(state, horizon, m, tol, disc)?;
    let n_final = reconstruct_density(state, &run, horizon, m, disc)?;
    let grid = Grid1D::new(run.ts.clone(), 0.0)?;
    let env = EnvironmentTrajectory::new(grid, run.s_vals.iter().map(|v| v.max(0.0)).collect())?;
    Ok(SolutionBundle {
        env,
        birth: SampledFn::new(run.ts.clone(), run.b_vals.clone()),
        consumption: SampledFn::new(run.ts.clone(), run.cons_vals.clone()),
        n_final,
        picard_iterations: run.iterations,
        picard_residual: run.residual,
    })
}

/// Advance the density state by time `t` (the semigroup action).
pub fn evolve(
    state: &DensityState,
    t: f64,
    m: &ModelIngredients,
    tol: &ToleranceSet,
    disc: &TimeDisc,
) -> Result<DensityState, EngineError> {
    assert!(t >= 0.0);
    if t == 0.0 {
        return Ok(state.clone());
    }
    Ok(picard_resource(state, t, m, tol, disc)?.n_final)
}

/// Assemble `n(t, .)` from the two branches of the characteristic solution:
/// transported founders where the backward characteristic stays above `x_b`,
/// newborns (via the birth rate and the boundary Jacobian) where it hits the
/// birth size at a positive time. The boundary characteristic itself takes
/// the newborn-side value.
fn reconstruct_density(
    state: &DensityState,
    run: &ConstructiveRun,
    t: f64,
    m: &ModelIngredients,
    disc: &TimeDisc,
) -> Result<DensityState, EngineError> {
    let old_grid = &state.x_grid;
    let nodes = old_grid.nodes();
    let dx = (old_grid.last() - old_grid.first()) / (nodes.len() - 1) as f64;
    // extend the grid so transported mass stays on it, keeping the interval
    // count even for Simpson quadrature downstream
    let mut extra = ((m.g_max * t) / dx).ceil() as usize;
    if (nodes.len() - 1 + extra) % 2 == 1 {
        extra += 1;
    }
    let n_new = nodes.len() + extra;
    let x_max_new = old_grid.first() + dx * (n_new - 1) as f64;
    let new_grid = Grid1D::uniform(old_grid.first(), x_max_new, n_new, state.kappa0)?;

    let t0 = run.ts[0];
    let dt = run.ts[1] - run.ts[0];
    let s_of_t = |tau: f64| interp_uniform(t0, dt, &run.s_vals, tau);
    let b_of_t = |tau: f64| interp_uniform(t0, dt, &run.b_vals, tau);
    let s_t = *run.s_vals.last().unwrap();

    let mut n_new_vals = vec![0.0; n_new];
    for (k, &x) in new_grid.nodes().iter().enumerate() {
        n_new_vals[k] = if k == 0 {
            // boundary condition g(x_b, S(t)) n(t, x_b) = b(t)
            b_of_t(t).max(0.0) / m.growth(m.x_b, s_t)
        } else {
            backtrace_density(state, x, t, m, disc, &s_of_t, &b_of_t)?
        };
    }

    // weighted tail: transported mass beyond the (old) grid decays like
    // C e^{-mu0 t} in the kappa0-weighted norm once growth is constant
    let (_, c_upper) = m.survival_bounds().unwrap_or((1.0, 1.0));
    let g_tail = if old_grid.last() >= m.x_bar { m.g_inf } else { m.g_max };
    let tail_factor = c_upper * ((state.kappa0 * g_tail - m.mu_hat) * t).exp();
    let tail_mass = state.tail_mass * tail_factor;

    let out = DensityState::new(new_grid, n_new_vals, s_t.max(0.0), state.kappa0, tail_mass)?;
    let budget = disc.tail_tol * out.state_norm().max(1e-300);
    if out.tail_mass > budget && out.tail_mass > 1e-300 {
        return Err(EngineError::TailBudget { tail: out.tail_mass, budget });
    }
    Ok(out)
}

/// Trace the characteristic through `(t, x)` backward. Integrates in the
/// size variable (size is a monotone clock since `g >= g_min > 0`); if the
/// clock crosses time zero before reaching `x_b`, finishes with a backward
/// time leg to land exactly on the initial slice.
#[allow(clippy::too_many_arguments)]
fn backtrace_density(
    state: &DensityState,
    x: f64,
    t: f64,
    m: &ModelIngredients,
    disc: &TimeDisc,
    s_of_t: &dyn Fn(f64) -> f64,
    b_of_t: &dyn Fn(f64) -> f64,
) -> Result<f64, EngineError> {
    let span = x - m.x_b;
    // size step matched to the grid spacing: the RK4 truncation then sits
    // far below the O(dx^2) interpolation error of the founder density
    let nodes = state.x_grid.nodes();
    let dx_state = (state.x_grid.last() - state.x_grid.first()) / (nodes.len() - 1) as f64;
    let dx_target = dx_state.min(m.g_min * disc.dt * 8.0).max(1e-9);
    let n = ((span / dx_target).ceil() as usize).max(2);
    let h = -span / n as f64;
    let mut xi = x;
    let mut ti = t;
    let mut imu = 0.0;
    let mut idg = 0.0;
    for k in 0..n {
        let (t2, imu2, idg2) = characteristics::step_size(m, s_of_t, xi, ti, imu, idg, h);
        if t2 < 0.0 {
            // crossed the initial slice within this step: finish by a
            // backward leg in time from the last state above zero
            return founder_branch(state, m, disc, s_of_t, b_of_t, xi, ti, imu, idg);
        }
        xi = x + h * (k + 1) as f64;
        ti = t2;
        imu = imu2;
        idg = idg2;
    }
    // reached the birth size at time ti >= 0: newborn branch
    // n = b(theta) F(t, theta, x_b) (-D2 T) with
    // -D2 T = e^{-int D1 g} / g(x_b, S(theta))
    let surv = imu.exp(); // imu accumulated backward, so it is -int mu
    let jac = idg.exp() / m.growth(m.x_b, s_of_t(ti));
    Ok((b_of_t(ti).max(0.0) * surv * jac).max(0.0))
}

#[allow(clippy::too_many_arguments)]
fn founder_branch(
    state: &DensityState,
    m: &ModelIngredients,
    disc: &TimeDisc,
    s_of_t: &dyn Fn(f64) -> f64,
    b_of_t: &dyn Fn(f64) -> f64,
    xi: f64,
    ti: f64,
    imu: f64,
    idg: f64,
) -> Result<f64, EngineError> {
    // integrate backward in time from (ti, xi) to 0
    let n = ((ti / (disc.dt / disc.substeps as f64)).ceil() as usize).max(1);
    let h = -ti / n as f64;
    let mut st = CharState { x: xi, imu, idg };
    for k in 0..n {
        st = characteristics::step_time(m, s_of_t, ti + h * k as f64, st, h, true);
    }
    let xi0 = st.x;
    if xi0 < m.x_b {
        // numerically on the boundary characteristic: take the newborn-side
        // limit (birth time ~ 0); a measure-zero set, irrelevant to integrals
        return Ok((b_of_t(0.0).max(0.0) * st.imu.exp() * st.idg.exp()
            / m.growth(m.x_b, s_of_t(0.0)))
        .max(0.0));
    }
    let n0 = if xi0 > state.x_grid.last() {
        0.0
    } else {
        // cubic lookup: the founder density is the one place where an O(dx^2)
        // interpolant would dominate the whole reconstruction error
        state.x_grid.interp_cubic(&state.n_values, xi0)
    };
    // both integrals were accumulated backward: st.imu = -int_0^t mu
    Ok((n0 * st.imu.exp() * st.idg.exp()).max(0.0))
}
