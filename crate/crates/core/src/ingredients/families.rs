//! Built-in analytic model families used by the validation suite and as
//! ready-made CLI models. Every family carries exact hypothesis metadata.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::{IngredientsError, LipschitzTable, ModelIngredients};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BuiltinFamily {
    /// Constant rates with `beta = beta0 * S` and `f(S) = r (cap - S)`.
    /// Closed forms: `R(S) = beta0 S / mu_hat`, `S* = mu_hat / beta0`,
    /// `b* = f(S*) mu_hat / gamma0`, `n*(x) = (b*/g0) e^{-mu_hat (x-x_b)/g0}`.
    ConstantCoefficient,
    /// Von Bertalanffy growth toward a food-dependent target size, floored at
    /// `g_inf` so growth is eventually constant; Monod functional responses.
    DaphniaVonBertalanffy,
    /// Fecundity decreasing in the resource (`beta = beta0 max(0, 2 - S)`),
    /// engineered so the reproduction number decreases at the steady state.
    InstabilityDemo,
}

impl BuiltinFamily {
    pub fn from_name(name: &str) -> Result<Self, IngredientsError> {
        match name {
            "constant_coefficient" => Ok(Self::ConstantCoefficient),
            "daphnia_vonbertalanffy" => Ok(Self::DaphniaVonBertalanffy),
            "instability_demo" => Ok(Self::InstabilityDemo),
            other => Err(IngredientsError::UnknownFamily(other.into())),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::ConstantCoefficient => "constant_coefficient",
            Self::DaphniaVonBertalanffy => "daphnia_vonbertalanffy",
            Self::InstabilityDemo => "instability_demo",
        }
    }
}

struct Params<'a> {
    family: &'static str,
    map: &'a BTreeMap<String, f64>,
}

impl Params<'_> {
    fn required(&self, key: &'static str) -> Result<f64, IngredientsError> {
        self.map
            .get(key)
            .copied()
            .ok_or(IngredientsError::MissingParam { family: self.family, param: key })
    }

    fn optional(&self, key: &'static str, default: f64) -> f64 {
        self.map.get(key).copied().unwrap_or(default)
    }

    fn positive(&self, key: &'static str) -> Result<f64, IngredientsError> {
        let v = self.required(key)?;
        if v > 0.0 && v.is_finite() {
            Ok(v)
        } else {
            Err(IngredientsError::BadParam {
                family: self.family,
                param: key.into(),
                value: v,
                why: "must be finite and strictly positive".into(),
            })
        }
    }
}

/// Construct a fully populated [`ModelIngredients`] for a named family.
pub fn builtin_family(
    family: BuiltinFamily,
    params: &BTreeMap<String, f64>,
) -> Result<ModelIngredients, IngredientsError> {
    match family {
        BuiltinFamily::ConstantCoefficient => constant_coefficient(params),
        BuiltinFamily::DaphniaVonBertalanffy => daphnia(params),
        BuiltinFamily::InstabilityDemo => instability_demo(params),
    }
}

fn constant_coefficient(map: &BTreeMap<String, f64>) -> Result<ModelIngredients, IngredientsError> {
    let p = Params { family: "constant_coefficient", map };
    let beta0 = p.positive("beta0")?;
    let mu_hat = p.positive("mu_hat")?;
    let gamma0 = p.positive("gamma0")?;
    let g0 = p.positive("g0")?;
    let x_b = p.required("x_b")?;
    let r = p.optional("resource_rate", 1.0);
    let cap = p.optional("resource_cap", 1.0);
    let s_hi = 2.0 * cap;
    Ok(ModelIngredients {
        g: Arc::new(move |_, _| g0),
        mu: Arc::new(move |_, _| mu_hat),
        beta: Arc::new(move |_, s| beta0 * s),
        gamma: Arc::new(move |_, _| gamma0),
        f: Arc::new(move |s| r * (cap - s)),
        x_b,
        x_bar: x_b + 1.0,
        g_inf: g0,
        mu_hat,
        sigma_integral: Some(0.0),
        sigma: Some(Arc::new(|_| 0.0)),
        g_min: g0,
        g_max: g0,
        beta_sup: beta0 * s_hi,
        gamma_sup: gamma0,
        lipschitz: Some(LipschitzTable {
            g: (0.0, 0.0),
            mu: (0.0, 0.0),
            beta: (0.0, beta0),
            gamma: (0.0, 0.0),
            f: r,
        }),
        hypothesis_box: Some(((x_b, x_b + 25.0 * g0 / mu_hat), (0.0, s_hi))),
        label: format!(
            "constant_coefficient(beta0={beta0},mu_hat={mu_hat},gamma0={gamma0},g0={g0},x_b={x_b},r={r},cap={cap})"
        ),
    })
}

fn daphnia(map: &BTreeMap<String, f64>) -> Result<ModelIngredients, IngredientsError> {
    let p = Params { family: "daphnia_vonbertalanffy", map };
    let gamma_r = p.positive("gamma_r")?;
    let x_m = p.positive("x_m")?;
    let g_inf = p.positive("g_inf")?;
    let mu_hat = p.positive("mu_hat")?;
    let beta0 = p.positive("beta0")?;
    let gamma0 = p.positive("gamma0")?;
    let x_b = p.required("x_b")?;
    let r = p.optional("resource_rate", 1.0);
    let cap = p.optional("resource_cap", 3.0);
    let mu_size = p.optional("mu_size", 0.3);
    let x_bar = x_m - g_inf / gamma_r;
    if x_bar <= x_b {
        return Err(IngredientsError::BadParam {
            family: "daphnia_vonbertalanffy",
            param: "x_m".into(),
            value: x_m,
            why: format!("x_m - g_inf/gamma_r = {x_bar} must exceed x_b = {x_b}"),
        });
    }
    let growth = move |x: f64, s: f64| gamma_r * (x_m * s / (1.0 + s) - x);
    let g = Arc::new(move |x: f64, s: f64| growth(x, s).max(g_inf)) as super::RateFn;
    let g_for_mu = g.clone();
    Ok(ModelIngredients {
        g: g.clone(),
        mu: Arc::new(move |x, s| mu_hat + mu_size * (-x).exp() * g_for_mu(x, s)),
        beta: Arc::new(move |x, s| beta0 * (s / (1.0 + s)) * (1.0 - (-(x - x_b)).exp())),
        gamma: Arc::new(move |_, s| gamma0 * s / (1.0 + s)),
        f: Arc::new(move |s| r * s * (1.0 - s / cap)),
        x_b,
        x_bar,
        g_inf,
        mu_hat,
        sigma_integral: Some(mu_size * (-x_b).exp()),
        sigma: Some(Arc::new(move |x: f64| mu_size * (-x).exp())),
        g_min: g_inf,
        g_max: (gamma_r * (x_m - x_b)).max(g_inf),
        beta_sup: beta0,
        gamma_sup: gamma0,
        lipschitz: Some(LipschitzTable {
            g: (gamma_r, gamma_r * x_m),
            mu: (
                mu_size * (-x_b).exp() * ((gamma_r * (x_m - x_b)).max(g_inf) + gamma_r),
                mu_size * (-x_b).exp() * gamma_r * x_m,
            ),
            beta: (beta0, beta0),
            gamma: (0.0, gamma0),
            f: r * (1.0 + 2.0 * 1.2),
        }),
        hypothesis_box: Some(((x_b, x_bar + 5.0), (0.0, 1.2 * cap))),
        label: format!(
            "daphnia_vonbertalanffy(gamma_r={gamma_r},x_m={x_m},g_inf={g_inf},mu_hat={mu_hat},beta0={beta0},gamma0={gamma0},x_b={x_b},r={r},cap={cap},mu_size={mu_size})"
        ),
    })
}

fn instability_demo(map: &BTreeMap<String, f64>) -> Result<ModelIngredients, IngredientsError> {
    let p = Params { family: "instability_demo", map };
    let beta0 = p.positive("beta0")?;
    let mu_hat = p.positive("mu_hat")?;
    let gamma0 = p.positive("gamma0")?;
    let x_b = p.required("x_b")?;
    let g0 = p.optional("g0", 1.0);
    let r = p.optional("resource_rate", 1.0);
    Ok(ModelIngredients {
        g: Arc::new(move |_, _| g0),
        mu: Arc::new(move |_, _| mu_hat),
        beta: Arc::new(move |_, s| beta0 * (2.0 - s).max(0.0)),
        gamma: Arc::new(move |_, _| gamma0),
        f: Arc::new(move |s| r * (1.0 - s)),
        x_b,
        x_bar: x_b + 1.0,
        g_inf: g0,
        mu_hat,
        sigma_integral: Some(0.0),
        sigma: Some(Arc::new(|_| 0.0)),
        g_min: g0,
        g_max: g0,
        beta_sup: 2.0 * beta0,
        gamma_sup: gamma0,
        lipschitz: Some(LipschitzTable {
            g: (0.0, 0.0),
            mu: (0.0, 0.0),
            beta: (0.0, beta0),
            gamma: (0.0, 0.0),
            f: r,
        }),
        // the box stays below the fecundity kink at S = 2, where the model
        // is smooth; steady states of interest sit in (0, 1)
        hypothesis_box: Some(((x_b, x_b + 25.0 * g0 / mu_hat), (0.0, 1.8))),
        label: format!(
            "instability_demo(beta0={beta0},mu_hat={mu_hat},gamma0={gamma0},x_b={x_b},g0={g0},r={r})"
        ),
    })
}

/// Convenience constructor from a family name and `(key, value)` pairs.
pub fn builtin_family_by_name(
    name: &str,
    params: &BTreeMap<String, f64>,
) -> Result<ModelIngredients, IngredientsError> {
    builtin_family(BuiltinFamily::from_name(name)?, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn constant_coefficient_closed_forms() {
        let m = builtin_family(
            BuiltinFamily::ConstantCoefficient,
            &params(&[("beta0", 2.0), ("mu_hat", 1.0), ("gamma0", 1.0), ("g0", 1.0), ("x_b", 1.0)]),
        )
        .unwrap();
        // R(S) = 2S for this parameterisation
        assert_eq!(m.fecundity(3.0, 0.5), 1.0);
        assert_eq!(m.growth(10.0, 0.2), 1.0);
        assert_eq!(m.mortality(2.0, 0.4), 1.0);
        assert_eq!(m.resource_rate(0.25), 0.75);
        assert_eq!(m.survival_bounds().unwrap(), (1.0, 1.0));
    }

    #[test]
    fn unknown_family_and_missing_params() {
        assert!(matches!(
            BuiltinFamily::from_name("nope"),
            Err(IngredientsError::UnknownFamily(_))
        ));
        assert!(matches!(
            builtin_family(BuiltinFamily::ConstantCoefficient, &params(&[("beta0", 2.0)])),
            Err(IngredientsError::MissingParam { .. })
        ));
    }

    #[test]
    fn daphnia_growth_is_eventually_constant() {
        let m = builtin_family(
            BuiltinFamily::DaphniaVonBertalanffy,
            &params(&[
                ("gamma_r", 1.0),
                ("x_m", 4.0),
                ("g_inf", 0.5),
                ("mu_hat", 0.3),
                ("beta0", 1.0),
                ("gamma0", 1.0),
                ("x_b", 0.5),
            ]),
        )
        .unwrap();
        assert!((m.x_bar - 3.5).abs() < 1e-14);
        for s in [0.0, 0.5, 3.0, 100.0] {
            for x in [3.5, 4.0, 10.0] {
                assert_eq!(m.growth(x, s), 0.5, "H_ginf violated at x={x}, S={s}");
            }
        }
        assert!(m.growth(0.5, 3.0) > 0.5);
        // sigma integral closed form: mu_size * e^{-x_b}
        assert!((m.sigma_integral.unwrap() - 0.3 * (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn instability_demo_reproduction_decreases() {
        let m = builtin_family(
            BuiltinFamily::InstabilityDemo,
            &params(&[("beta0", 0.75), ("mu_hat", 1.0), ("gamma0", 1.0), ("x_b", 1.0)]),
        )
        .unwrap();
        // beta decreasing in S below the kink
        assert!(m.fecundity(2.0, 0.5) > m.fecundity(2.0, 1.0));
        assert_eq!(m.fecundity(2.0, 3.0), 0.0);
    }
}
