//! The delay-side semigroup on weighted histories.
//!
//! A state is a pair `(phi, psi)` of birth-rate and resource histories on
//! ages `a >= 0` (time `theta = -a`), normed by
//! `int e^{-mu0 a} |phi(-a)| da + sup e^{-mu0 a} |psi(-a)|`. Evolution
//! extends `(b, S)` forward with the same constructive core as the density
//! engine (via the history-to-density map) and then shifts: the output grid
//! keeps the input nodes translated by `t`, so the norm contribution of the
//! original history decays by exactly `e^{-mu0 t}` in the discrete norm too.

use thiserror::Error;

use crate::characteristics::{self, CharacteristicsError, EnvironmentTrajectory};
use crate::ingredients::{IngredientsError, ModelIngredients};
use crate::numerics::{Grid1D, NumericsError, SampledFn, ToleranceSet};
use crate::pde_engine::{self, EngineError, TimeDisc};

#[derive(Debug, Clone, Error)]
pub enum DelayError {
    #[error("history values must be finite and nonnegative (index {0})")]
    BadHistory(usize),
    #[error("age grid must start at 0 (got {0})")]
    GridNotAnchored(f64),
    #[error("history weight mu0 = {0} must be strictly positive")]
    BadWeight(f64),
    #[error("resource history spans ages up to {have} but age {needed} is required and the tail is declared decaying; enlarge a_max")]
    PsiSpan { needed: f64, have: f64 },
    #[error("kernel tail budget {tail} exceeds {budget}; enlarge a_max")]
    TailBudget { tail: f64, budget: f64 },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Intertwine(Box<crate::intertwine::IntertwineError>),
    #[error(transparent)]
    Characteristics(#[from] CharacteristicsError),
    #[error(transparent)]
    Ingredients(#[from] IngredientsError),
    #[error(transparent)]
    Numerics(#[from] NumericsError),
}

/// How the resource history continues beyond the stored age horizon.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PsiTail {
    /// `psi(-a) = psi(-a_max)` for `a > a_max` (the pseudo-inverse builds
    /// constant histories, so this is the default).
    ConstantExtension,
    /// `psi(-a) e^{-mu0 a} -> 0`; values beyond `a_max` are unavailable.
    Decaying,
}

/// Delay-side state: birth-rate and resource histories on an age grid.
#[derive(Debug, Clone)]
pub struct HistoryState {
    /// Ages `[0, a_max]`, ascending, not necessarily uniform.
    pub a_grid: Grid1D,
    /// `phi(-a)` at the age nodes (locally integrable representative with
    /// trapezoid semantics).
    pub phi_values: Vec<f64>,
    /// `psi(-a)` at the age nodes (continuous).
    pub psi_values: Vec<f64>,
    pub mu0: f64,
    /// Declared `int_{a_max}^inf e^{-mu0 a} |phi| da`.
    pub phi_tail_norm: f64,
    pub psi_tail_mode: PsiTail,
}

/// The two weighted parts of the history norm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistoryNorm {
    pub phi_part: f64,
    pub psi_part: f64,
    pub total: f64,
}

impl HistoryState {
    pub fn new(
        a_grid: Grid1D,
        phi_values: Vec<f64>,
        psi_values: Vec<f64>,
        mu0: f64,
        phi_tail_norm: f64,
        psi_tail_mode: PsiTail,
    ) -> Result<Self, DelayError> {
        assert_eq!(a_grid.len(), phi_values.len());
        assert_eq!(a_grid.len(), psi_values.len());
        if a_grid.first() != 0.0 {
            return Err(DelayError::GridNotAnchored(a_grid.first()));
        }
        if !(mu0 > 0.0) {
            return Err(DelayError::BadWeight(mu0));
        }
        for (i, v) in phi_values.iter().chain(psi_values.iter()).enumerate() {
            if !v.is_finite() || *v < 0.0 {
                return Err(DelayError::BadHistory(i % phi_values.len()));
            }
        }
        Ok(Self { a_grid, phi_values, psi_values, mu0, phi_tail_norm, psi_tail_mode })
    }

    /// Constant history `(b, S)`, the delay-side representation of a steady
    /// state.
    pub fn constant(
        b: f64,
        s: f64,
        mu0: f64,
        a_max: f64,
        n_nodes: usize,
    ) -> Result<Self, DelayError> {
        let grid = Grid1D::uniform(0.0, a_max, n_nodes, mu0).map_err(DelayError::Numerics)?;
        // exact tail of the constant: int_{a_max}^inf b e^{-mu0 a} da
        let tail = b * (-mu0 * a_max).exp() / mu0;
        Self::new(grid, vec![b; n_nodes], vec![s; n_nodes], mu0, tail, PsiTail::ConstantExtension)
    }

    /// `phi(theta)` for `theta <= 0` (zero beyond the stored horizon; that
    /// mass lives in `phi_tail_norm`).
    pub fn phi_at(&self, theta: f64) -> f64 {
        let a = -theta;
        if a > self.a_grid.last() {
            0.0
        } else {
            self.a_grid.interp(&self.phi_values, a)
        }
    }

    /// `psi(theta)` for `theta <= 0`, honouring the tail mode.
    pub fn psi_at(&self, theta: f64) -> Result<f64, DelayError> {
        let a = -theta;
        if a > self.a_grid.last() * (1.0 + 1e-12) + 1e-12 {
            match self.psi_tail_mode {
                PsiTail::ConstantExtension => Ok(*self.psi_values.last().unwrap()),
                PsiTail::Decaying => {
                    Err(DelayError::PsiSpan { needed: a, have: self.a_grid.last() })
                }
            }
        } else {
            Ok(self.a_grid.interp(&self.psi_values, a))
        }
    }

    pub fn s_now(&self) -> f64 {
        self.psi_values[0]
    }
}

/// The weighted norm of Definition 3.3, split into its parts.
pub fn history_norm(h: &HistoryState) -> HistoryNorm {
    let mut phi_part = h.phi_tail_norm;
    let nodes = h.a_grid.nodes();
    for i in 0..nodes.len() - 1 {
        let w = 0.5 * (nodes[i + 1] - nodes[i]);
        phi_part += w
            * (h.phi_values[i].abs() * (-h.mu0 * nodes[i]).exp()
                + h.phi_values[i + 1].abs() * (-h.mu0 * nodes[i + 1]).exp());
    }
    let psi_part = nodes
        .iter()
        .zip(&h.psi_values)
        .map(|(&a, &v)| v.abs() * (-h.mu0 * a).exp())
        .fold(0.0f64, f64::max);
    // constant extension beyond a_max is dominated by the last node value,
    // so the node max already covers the tail
    HistoryNorm { phi_part, psi_part, total: phi_part + psi_part }
}

/// Weighted distance between two histories, resampled onto the union of
/// their age grids; the declared phi tails contribute their difference.
pub fn history_distance(h1: &HistoryState, h2: &HistoryState) -> f64 {
    debug_assert_eq!(h1.mu0, h2.mu0);
    let mu0 = h1.mu0;
    let mut ages: Vec<f64> = h1
        .a_grid
        .nodes()
        .iter()
        .chain(h2.a_grid.nodes())
        .copied()
        .collect();
    ages.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ages.dedup();
    let phi = |h: &HistoryState, a: f64| h.phi_at(-a);
    let psi = |h: &HistoryState, a: f64| h.psi_at(-a).unwrap_or(*h.psi_values.last().unwrap());
    let mut phi_part = (h1.phi_tail_norm - h2.phi_tail_norm).abs();
    for w in ages.windows(2) {
        let f0 = (phi(h1, w[0]) - phi(h2, w[0])).abs() * (-mu0 * w[0]).exp();
        let f1 = (phi(h1, w[1]) - phi(h2, w[1])).abs() * (-mu0 * w[1]).exp();
        phi_part += 0.5 * (w[1] - w[0]) * (f0 + f1);
    }
    let mut psi_part = 0.0f64;
    for &a in &ages {
        psi_part = psi_part.max((psi(h1, a) - psi(h2, a)).abs() * (-mu0 * a).exp());
    }
    phi_part + psi_part
}

/// The resource history as an [`EnvironmentTrajectory`] on
/// `[-extend_to, 0]`, extending beyond the stored horizon per the tail mode.
pub fn history_environment(
    h: &HistoryState,
    extend_to: f64,
) -> Result<EnvironmentTrajectory, DelayError> {
    let a_max = h.a_grid.last();
    let mut thetas: Vec<f64> = h.a_grid.nodes().iter().rev().map(|&a| -a).collect();
    let mut values: Vec<f64> = h.psi_values.iter().rev().copied().collect();
    if extend_to > a_max {
        match h.psi_tail_mode {
            PsiTail::ConstantExtension => {
                thetas.insert(0, -extend_to);
                values.insert(0, *h.psi_values.last().unwrap());
            }
            PsiTail::Decaying => {
                return Err(DelayError::PsiSpan { needed: extend_to, have: a_max });
            }
        }
    }
    let grid = Grid1D::new(thetas, 0.0).map_err(DelayError::Numerics)?;
    Ok(EnvironmentTrajectory::new(grid, values).map_err(DelayError::Characteristics)?)
}

/// The delay right-hand side at the current history:
/// `F1 = int beta(X_psi(0,-a,x_b), psi(0)) F_psi(0,-a,x_b) phi(-a) da` and
/// `F2 = f(psi(0)) - (same with gamma)`. The part of the integrals beyond
/// the stored age horizon is bounded analytically and must stay within the
/// quadrature budget.
pub fn rhs_f(
    h: &HistoryState,
    m: &ModelIngredients,
    tol: &ToleranceSet,
) -> Result<(f64, f64), DelayError> {
    let (_, c_upper) = m.survival_bounds()?;
    let a_max = h.a_grid.last();
    let env = history_environment(h, a_max)?;
    let s0 = h.s_now();
    let ages = h.a_grid.nodes();
    let n = ages.len();
    let mut f1 = 0.0;
    let mut cons = 0.0;
    // characteristic from (-a, x_b) to 0 for each age node
    for j in 0..n {
        let a = ages[j];
        let w = if j == 0 {
            0.5 * (ages[1] - ages[0])
        } else if j == n - 1 {
            0.5 * (ages[n - 1] - ages[n - 2])
        } else {
            0.5 * (ages[j + 1] - ages[j - 1])
        };
        if h.phi_values[j] == 0.0 {
            continue;
        }
        let p = if a == 0.0 {
            characteristics::FlowPoint { x: m.x_b, imu: 0.0, idg: 0.0 }
        } else {
            let steps = ((a * 256.0).ceil() as usize).max(4);
            characteristics::integrate_flow(&env, 0.0, -a, m.x_b, m, steps)?
        };
        let surv = (-p.imu).exp();
        f1 += w * m.fecundity(p.x, s0) * surv * h.phi_values[j];
        cons += w * m.consumption(p.x, s0) * surv * h.phi_values[j];
    }
    // analytic tail: kernel <= sup * C e^{-mu_hat a}, phi mass beyond a_max
    // is phi_tail_norm in the e^{-mu0 a} weighted norm
    let tail = c_upper
        * m.beta_sup.max(m.gamma_sup)
        * ((h.mu0 - m.mu_hat) * a_max).exp()
        * h.phi_tail_norm;
    let scale = f1.abs().max(cons.abs()).max(1.0);
    if tail > tol.quad_rel * scale * 1e3 {
        return Err(DelayError::TailBudget { tail, budget: tol.quad_rel * scale * 1e3 });
    }
    Ok((f1, m.resource_rate(s0) - cons))
}

/// Advance the history by `t`: compute the equivalent density, run the
/// constructive core on `[0, t]`, splice the new `(b, S)` segment in front
/// of the shifted input history.
pub fn evolve_history(
    h: &HistoryState,
    t: f64,
    m: &ModelIngredients,
    x_grid: &Grid1D,
    tol: &ToleranceSet,
    disc: &TimeDisc,
) -> Result<HistoryState, DelayError> {
    Ok(evolve_history_detailed(h, t, m, x_grid, tol, disc)?.0)
}

/// As [`evolve_history`], also returning the constructed `(b, S)` on `[0, t]`.
pub fn evolve_history_detailed(
    h: &HistoryState,
    t: f64,
    m: &ModelIngredients,
    x_grid: &Grid1D,
    tol: &ToleranceSet,
    disc: &TimeDisc,
) -> Result<(HistoryState, SampledFn, SampledFn), DelayError> {
    assert!(t >= 0.0);
    if t == 0.0 {
        let ts = SampledFn::new(vec![0.0, 1.0], vec![h.phi_values[0], h.phi_values[0]]);
        let ss = SampledFn::new(vec![0.0, 1.0], vec![h.s_now(), h.s_now()]);
        return Ok((h.clone(), ts, ss));
    }
    let n0 = crate::intertwine::map_l(h, m, x_grid)
        .map_err(|e| DelayError::Intertwine(Box::new(e)))?;
    let run = pde_engine::solve_constructive(&n0, t, m, tol, disc)?;

    // splice: new ages [0, t) from the run (reversed), then the old nodes
    // shifted by t. For histories that do not satisfy the delay system the
    // concatenated birth function genuinely jumps at the junction
    // (b(0+) != phi(0-)), so both one-sided values are kept: the last new
    // node is nudged to t - eps with b(0), and age t carries phi(0-).
    let eps = 1e-6 * (run.ts[1] - run.ts[0]);
    let mut ages: Vec<f64> = run.ts.iter().rev().map(|&tau| t - tau).collect();
    *ages.last_mut().unwrap() = t - eps;
    let mut phi: Vec<f64> = run.b_vals.iter().rev().copied().collect();
    let mut psi: Vec<f64> = run.s_vals.iter().rev().map(|v| v.max(0.0)).collect();
    for (i, &a) in h.a_grid.nodes().iter().enumerate() {
        ages.push(a + t);
        phi.push(h.phi_values[i]);
        psi.push(h.psi_values[i]);
    }
    let grid = Grid1D::new(ages, h.mu0).map_err(DelayError::Numerics)?;
    let out = HistoryState::new(
        grid,
        phi,
        psi,
        h.mu0,
        h.phi_tail_norm * (-h.mu0 * t).exp(),
        h.psi_tail_mode,
    )?;
    Ok((
        out,
        SampledFn::new(run.ts.clone(), run.b_vals.clone()),
        SampledFn::new(run.ts, run.s_vals),
    ))
}

/// Truncate a history to `a_max`, folding the discarded birth-rate segment
/// into the declared tail norm (same trapezoid rule, so norms are
/// preserved); the resource history keeps its last value for the
/// constant-extension mode.
pub fn truncate_history(h: &HistoryState, a_max: f64) -> Result<HistoryState, DelayError> {
    let nodes = h.a_grid.nodes();
    if a_max >= h.a_grid.last() {
        return Ok(h.clone());
    }
    let keep = nodes.iter().take_while(|&&a| a <= a_max).count().max(2);
    let mut tail = h.phi_tail_norm;
    for i in (keep - 1)..nodes.len() - 1 {
        tail += 0.5
            * (nodes[i + 1] - nodes[i])
            * (h.phi_values[i].abs() * (-h.mu0 * nodes[i]).exp()
                + h.phi_values[i + 1].abs() * (-h.mu0 * nodes[i + 1]).exp());
    }
    let grid = Grid1D::new(nodes[..keep].to_vec(), h.mu0).map_err(DelayError::Numerics)?;
    HistoryState::new(
        grid,
        h.phi_values[..keep].to_vec(),
        h.psi_values[..keep].to_vec(),
        h.mu0,
        tail,
        h.psi_tail_mode,
    )
}

/// Default age horizon: `e^{(mu0 - mu_hat) a_max} <= 1e-10`, so the kernel
/// tail is negligible under the survival bounds.
pub fn default_age_horizon(m: &ModelIngredients, mu0: f64) -> f64 {
    assert!(mu0 < m.mu_hat, "age horizon needs mu0 < mu_hat");
    10.0 * std::f64::consts::LN_10 / (m.mu_hat - mu0)
}

/// Age horizon that keeps the *norm* tail of an O(1) history below `rel`:
/// the weighted norm decays only at rate `mu0`, which for small `mu0` is the
/// binding constraint (the kernel horizon above decays at `mu_hat - mu0`).
pub fn norm_age_horizon(mu0: f64, rel: f64) -> f64 {
    assert!(mu0 > 0.0 && rel > 0.0 && rel < 1.0);
    -rel.ln() / mu0
}

/// Size horizon matched to an age horizon: every size on the grid must pull
/// back to a birth age inside the stored history (flow bound
/// `-T(x_b, x, 0) <= (x - c1)/g_inf`).
pub fn matched_size_horizon(m: &ModelIngredients, a_max: f64) -> f64 {
    let c1 = m.x_bar - (m.x_bar - m.x_b) * m.g_inf / m.g_min;
    c1 + m.g_inf * a_max
}
