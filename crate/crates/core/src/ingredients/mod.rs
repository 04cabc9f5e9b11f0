//! Model ingredients and their structural metadata.
//!
//! A model is five rate functions plus the constants that the theory needs:
//! the birth size `x_b`, the size `x_bar` beyond which growth is the constant
//! `g_inf`, the asymptotic mortality `mu_hat` together with the integral of
//! the mortality-deviation envelope `sigma`, global growth bounds and
//! per-ingredient Lipschitz data. Hypotheses are verified by dense sampling
//! on a user-declared box; a PASS is evidence, not a proof.

mod expr;
mod families;
mod hypotheses;

pub use expr::{Expr, ExprError};
pub use families::{builtin_family, builtin_family_by_name, BuiltinFamily};
pub use hypotheses::{check_hypotheses, HypothesisCheck, HypothesisReport, SampleBox};

use std::sync::Arc;

use thiserror::Error;

/// Rate function of (size, resource concentration).
pub type RateFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Function of the resource concentration alone.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Error)]
pub enum IngredientsError {
    #[error("unknown builtin family `{0}`")]
    UnknownFamily(String),
    #[error("family `{family}` is missing parameter `{param}`")]
    MissingParam { family: &'static str, param: &'static str },
    #[error("family `{family}`: parameter `{param}` = {value} is out of range: {why}")]
    BadParam { family: &'static str, param: String, value: f64, why: String },
    #[error("H_s metadata required: declare sigma_integral to use delay-side weighted norms")]
    MissingSigmaIntegral,
    #[error("invalid weight mu0 = {mu0}: must satisfy 0 < mu0 <= mu_hat = {mu_hat}")]
    BadWeight { mu0: f64, mu_hat: f64 },
    #[error("expression error: {0}")]
    Expr(#[from] ExprError),
}

/// Per-ingredient Lipschitz constants `(L_x, L_S)`; `f` only depends on `S`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzTable {
    pub g: (f64, f64),
    pub mu: (f64, f64),
    pub beta: (f64, f64),
    pub gamma: (f64, f64),
    pub f: f64,
}

/// The five model rates plus structural constants and hypothesis metadata.
///
/// All rate evaluations clamp the resource at zero from below, so tiny
/// negative Picard iterates cannot leave the ingredient domain.
#[derive(Clone)]
pub struct ModelIngredients {
    pub g: RateFn,
    pub mu: RateFn,
    pub beta: RateFn,
    pub gamma: RateFn,
    pub f: ScalarFn,
    /// Birth size; the structured variable lives on `[x_b, infinity)`.
    pub x_b: f64,
    /// Size beyond which the growth rate equals `g_inf` for every resource level.
    pub x_bar: f64,
    pub g_inf: f64,
    /// Asymptotic mortality rate.
    pub mu_hat: f64,
    /// Integral over `[x_b, infinity)` of the envelope `sigma` bounding
    /// `|mu - mu_hat| <= sigma(x) g(x, S)`; `None` when undeclared.
    pub sigma_integral: Option<f64>,
    /// Optional envelope function itself, for pointwise spot checks.
    pub sigma: Option<ScalarFn>,
    pub g_min: f64,
    pub g_max: f64,
    /// Bound on `beta` over the documented box.
    pub beta_sup: f64,
    /// Bound on `gamma` over the documented box.
    pub gamma_sup: f64,
    pub lipschitz: Option<LipschitzTable>,
    /// Documented hypothesis box `((x_lo, x_hi), (s_lo, s_hi))`.
    pub hypothesis_box: Option<SampleBox>,
    /// Short label used in reports and output-file hashes.
    pub label: String,
}

impl std::fmt::Debug for ModelIngredients {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ModelIngredients")
            .field("label", &self.label)
            .field("x_b", &self.x_b)
            .field("x_bar", &self.x_bar)
            .field("g_inf", &self.g_inf)
            .field("mu_hat", &self.mu_hat)
            .field("sigma_integral", &self.sigma_integral)
            .field("g_min", &self.g_min)
            .field("g_max", &self.g_max)
            .finish_non_exhaustive()
    }
}

const FD_STEP: f64 = 1e-6;

fn fd_step(v: f64) -> f64 {
    FD_STEP * (1.0 + v.abs())
}

impl ModelIngredients {
    pub fn growth(&self, x: f64, s: f64) -> f64 {
        (self.g)(x, s.max(0.0))
    }

    pub fn mortality(&self, x: f64, s: f64) -> f64 {
        (self.mu)(x, s.max(0.0))
    }

    pub fn fecundity(&self, x: f64, s: f64) -> f64 {
        (self.beta)(x, s.max(0.0))
    }

    pub fn consumption(&self, x: f64, s: f64) -> f64 {
        (self.gamma)(x, s.max(0.0))
    }

    pub fn resource_rate(&self, s: f64) -> f64 {
        (self.f)(s.max(0.0))
    }

    /// d/dx of the growth rate, by central finite difference.
    pub fn d1_growth(&self, x: f64, s: f64) -> f64 {
        let h = fd_step(x);
        (self.growth(x + h, s) - self.growth((x - h).max(self.x_b), s))
            / (x + h - (x - h).max(self.x_b))
    }

    /// d/dS of the growth rate.
    pub fn d2_growth(&self, x: f64, s: f64) -> f64 {
        central_s(|v| self.growth(x, v), s)
    }

    pub fn d1_mortality(&self, x: f64, s: f64) -> f64 {
        let h = fd_step(x);
        (self.mortality(x + h, s) - self.mortality((x - h).max(self.x_b), s))
            / (x + h - (x - h).max(self.x_b))
    }

    pub fn d2_mortality(&self, x: f64, s: f64) -> f64 {
        central_s(|v| self.mortality(x, v), s)
    }

    pub fn d1_fecundity(&self, x: f64, s: f64) -> f64 {
        let h = fd_step(x);
        (self.fecundity(x + h, s) - self.fecundity((x - h).max(self.x_b), s))
            / (x + h - (x - h).max(self.x_b))
    }

    pub fn d2_fecundity(&self, x: f64, s: f64) -> f64 {
        central_s(|v| self.fecundity(x, v), s)
    }

    pub fn d1_consumption(&self, x: f64, s: f64) -> f64 {
        let h = fd_step(x);
        (self.consumption(x + h, s) - self.consumption((x - h).max(self.x_b), s))
            / (x + h - (x - h).max(self.x_b))
    }

    pub fn d2_consumption(&self, x: f64, s: f64) -> f64 {
        central_s(|v| self.consumption(x, v), s)
    }

    pub fn d_resource_rate(&self, s: f64) -> f64 {
        central_s(|v| self.resource_rate(v), s)
    }

    /// Survival envelope constants `(c, C)` with
    /// `c e^{-mu_hat (t-s)} <= F_S(t, s, x_b) <= C e^{-mu_hat (t-s)}`,
    /// derived from the declared `sigma_integral`.
    pub fn survival_bounds(&self) -> Result<(f64, f64), IngredientsError> {
        let si = self.sigma_integral.ok_or(IngredientsError::MissingSigmaIntegral)?;
        Ok(((-si).exp(), si.exp()))
    }
}

/// Central difference in the resource argument, clamped at S = 0 on the left.
fn central_s(f: impl Fn(f64) -> f64, s: f64) -> f64 {
    let h = fd_step(s);
    let lo = (s - h).max(0.0);
    let hi = s + h;
    (f(hi) - f(lo)) / (hi - lo)
}

/// The paired weights of the two state spaces: histories carry `e^{-mu0 a}`,
/// densities carry `e^{+kappa0 x}` with `kappa0 = (mu_hat - mu0)/g_inf`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightPair {
    pub mu0: f64,
    pub kappa0: f64,
}

impl WeightPair {
    /// Derive the density-side weight from `mu0`; requires `0 < mu0 <= mu_hat`.
    pub fn derive(m: &ModelIngredients, mu0: f64) -> Result<Self, IngredientsError> {
        if !(mu0 > 0.0) || mu0 > m.mu_hat {
            return Err(IngredientsError::BadWeight { mu0, mu_hat: m.mu_hat });
        }
        Ok(Self { mu0, kappa0: (m.mu_hat - mu0) / m.g_inf })
    }

    /// The default spectral-safe choice `mu0 = mu_hat / 4` (this satisfies
    /// the `3 mu0 < mu_hat` requirement of the stability theory; the theory
    /// itself gives no guidance on the choice, so reports flag it).
    pub fn auto(m: &ModelIngredients) -> Self {
        Self::derive(m, 0.25 * m.mu_hat).expect("mu_hat/4 is always admissible")
    }

    /// The degenerate pairing `mu0 = mu_hat`, `kappa0 = 0` (plain L1 on the
    /// density side; growth need not be eventually constant). Explicit opt-in.
    pub fn unweighted_density_side(m: &ModelIngredients) -> Self {
        Self { mu0: m.mu_hat, kappa0: 0.0 }
    }

    /// Whether this pair is admissible for spectral work (`3 mu0 < mu_hat`).
    pub fn spectral_ok(&self, m: &ModelIngredients) -> bool {
        3.0 * self.mu0 < m.mu_hat
    }
}
