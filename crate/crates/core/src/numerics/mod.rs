//! Shared numerical kernels.
//!
//! Everything downstream (characteristic flows, the renewal solver, steady
//! states, the characteristic equation) is built on the fixed-step routines
//! in this module, so that the PDE and delay engines see mutually consistent
//! discretisations. All routines are pure functions of their inputs.

mod grid;
mod ode;
pub(crate) mod quad;
mod roots;
mod volterra;
mod winding;

pub use grid::Grid1D;
pub use ode::{ode_solve, SampledFn};
pub use quad::{quad, QuadRule};
pub use roots::find_root_bracketed;
pub use volterra::volterra2_solve;
pub use winding::{complex_roots_in_rectangle, winding_number, ComplexRect, LocatedRoot};

use thiserror::Error;

/// Default RK4 step density: steps per unit of integration span.
pub const ODE_STEPS_PER_UNIT: f64 = 2048.0;

/// Errors raised by the numerical kernels.
#[derive(Debug, Clone, Error)]
pub enum NumericsError {
    #[error("grid must have at least 2 strictly increasing nodes (violated at index {0})")]
    InvalidGrid(usize),
    #[error("non-finite value in {context} at t={t}")]
    NonFinite { context: &'static str, t: f64 },
    #[error("ode state blew up (|y| > 1e154) at t={0}; rhs likely singular")]
    OdeBlowUp(f64),
    #[error("quadrature interval reversed: a={a} > b={b}")]
    ReversedInterval { a: f64, b: f64 },
    #[error("degenerate integration span: t0 == t1 == {0}")]
    DegenerateSpan(f64),
    #[error("volterra diagonal 1 - h/2*K(t,t) = {diag} <= 0 at node {index}; grid too coarse")]
    GridTooCoarse { index: usize, diag: f64 },
    #[error("no sign change on bracket [{lo}, {hi}]: f(lo)={flo}, f(hi)={fhi}")]
    NoBracket { lo: f64, hi: f64, flo: f64, fhi: f64 },
    #[error("root finder failed to converge within {0} iterations")]
    RootMaxIter(usize),
    #[error("winding integral {0} is far from an integer; a root may lie on the rectangle boundary, perturb the rectangle")]
    BoundaryRootSuspected(f64),
    #[error("|f| = {value} on the contour at {z:?}; a root lies (numerically) on the rectangle boundary, perturb the rectangle")]
    RootOnBoundary { z: (f64, f64), value: f64 },
}

/// Fixed tolerance profile shared by all modules.
///
/// Defaults follow the overall error budget: the O(h^2) Volterra march
/// dominates, every other tolerance sits well below it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceSet {
    /// Target relative accuracy of ODE solutions (fixed-step RK4 is sized to meet it).
    pub ode_rel: f64,
    /// Target absolute accuracy of ODE solutions.
    pub ode_abs: f64,
    /// Relative quadrature accuracy for standalone integrals.
    pub quad_rel: f64,
    /// Convergence threshold for the resource fixed-point iteration.
    pub picard_tol: f64,
    /// Absolute tolerance for scalar and complex root finding.
    pub root_tol: f64,
    /// Iteration cap for fixed-point and root-finding loops.
    pub max_iter: usize,
}

impl Default for ToleranceSet {
    fn default() -> Self {
        Self {
            ode_rel: 1e-8,
            ode_abs: 1e-10,
            quad_rel: 1e-8,
            picard_tol: 1e-10,
            root_tol: 1e-10,
            max_iter: 200,
        }
    }
}

impl ToleranceSet {
    /// A faster, looser profile for smoke runs.
    pub fn fast() -> Self {
        Self {
            ode_rel: 1e-6,
            ode_abs: 1e-8,
            quad_rel: 1e-6,
            picard_tol: 1e-8,
            root_tol: 1e-8,
            max_iter: 100,
        }
    }

    /// A tighter profile for convergence studies.
    pub fn strict() -> Self {
        Self {
            ode_rel: 1e-10,
            ode_abs: 1e-12,
            quad_rel: 1e-10,
            picard_tol: 1e-12,
            root_tol: 1e-12,
            max_iter: 400,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let all = [
            ("ode_rel", self.ode_rel),
            ("ode_abs", self.ode_abs),
            ("quad_rel", self.quad_rel),
            ("picard_tol", self.picard_tol),
            ("root_tol", self.root_tol),
        ];
        for (name, v) in all {
            if !(v > 0.0) {
                return Err(format!("tolerance {name} must be strictly positive, got {v}"));
            }
        }
        if self.max_iter < 1 {
            return Err("max_iter must be >= 1".into());
        }
        Ok(())
    }
}
