//! Flat key-value scenario configuration with dotted section names.
//!
//! ```text
//! # comment
//! model.family = constant_coefficient
//! model.param.beta0 = 2.0
//! weights.mu0 = auto
//! grids.n_x = 1025
//! run.horizon = 5.0
//! initial.density = exp(-(x - 2.0)*(x - 2.0))
//! initial.s0 = 0.8
//! ```
//!
//! Models are either a builtin family (`model.family` + `model.param.*`) or
//! an expression table (`model.g/mu/beta/gamma/f` in the grammar of the
//! ingredients module, plus the structural constants).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use sizestruct::ingredients::{
    builtin_family_by_name, Expr, LipschitzTable, ModelIngredients, WeightPair,
};
use sizestruct::numerics::ToleranceSet;
use sizestruct::pde_engine::TimeDisc;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}:{line}: expected `key = value`, got `{text}`")]
    Syntax { path: String, line: usize, text: String },
    #[error("{path}: duplicate key `{0}` (line {1})", .key, .line)]
    Duplicate { path: String, key: String, line: usize },
    #[error("missing required key `{0}`")]
    Missing(String),
    #[error("key `{key}`: {why}")]
    BadValue { key: String, why: String },
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("{0}")]
    Model(String),
    #[error("config file {0}: {1}")]
    Io(PathBuf, std::io::Error),
    #[error("override `{0}` is not of the form key=value")]
    BadOverride(String),
}

/// Raw parsed key-value table, keeping insertion order for reproducibility.
#[derive(Debug, Clone, Default)]
pub struct RawConfig {
    pub entries: BTreeMap<String, String>,
}

impl RawConfig {
    pub fn parse(text: &str, path: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        for (idx, raw_line) in text.lines().enumerate() {
            let line = raw_line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return Err(ConfigError::Syntax {
                    path: path.into(),
                    line: idx + 1,
                    text: line.into(),
                });
            };
            let key = key.trim().to_string();
            let value = value.trim().to_string();
            if entries.insert(key.clone(), value).is_some() {
                return Err(ConfigError::Duplicate { path: path.into(), key, line: idx + 1 });
            }
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
        Self::parse(&text, &path.display().to_string())
    }

    pub fn apply_override(&mut self, spec: &str) -> Result<(), ConfigError> {
        let Some((key, value)) = spec.split_once('=') else {
            return Err(ConfigError::BadOverride(spec.into()));
        };
        self.entries.insert(key.trim().into(), value.trim().into());
        Ok(())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    fn require(&self, key: &str) -> Result<&str, ConfigError> {
        self.get(key).ok_or_else(|| ConfigError::Missing(key.into()))
    }

    fn f64_of(&self, key: &str) -> Result<f64, ConfigError> {
        let v = self.require(key)?;
        v.parse().map_err(|_| ConfigError::BadValue {
            key: key.into(),
            why: format!("`{v}` is not a number"),
        })
    }

    fn f64_opt(&self, key: &str) -> Result<Option<f64>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    why: format!("`{v}` is not a number"),
                }),
        }
    }

    fn usize_opt(&self, key: &str) -> Result<Option<usize>, ConfigError> {
        match self.get(key) {
            None => Ok(None),
            Some(v) => v
                .parse()
                .map(Some)
                .map_err(|_| ConfigError::BadValue {
                    key: key.into(),
                    why: format!("`{v}` is not a positive integer"),
                }),
        }
    }
}

/// What to start a simulation from.
#[derive(Debug, Clone)]
pub enum InitialSpec {
    /// Density expression in `x` plus the initial resource level.
    DensityExpr { expr: Expr, s0: f64 },
    DensityFile { path: PathBuf, s0: f64 },
    /// History expressions in the age variable (written `x` in the grammar).
    HistoryExpr { phi: Expr, psi: Expr, decaying_tail: bool },
    HistoryFile { path: PathBuf, decaying_tail: bool },
    None,
}

/// Fully resolved scenario.
pub struct Scenario {
    pub model: ModelIngredients,
    pub weights: WeightPair,
    pub x_max: f64,
    pub n_x: usize,
    pub a_max: f64,
    pub n_a: usize,
    pub disc: TimeDisc,
    pub tol: ToleranceSet,
    pub horizon: f64,
    pub initial: InitialSpec,
    pub out_dir: PathBuf,
    pub s_bracket: Option<(f64, f64)>,
    pub scan: Option<(f64, f64, f64, f64)>,
    pub margin: Option<f64>,
    pub model_hash: u64,
}

const KNOWN_PREFIXES: &[&str] =
    &["model.", "weights.", "grids.", "run.", "initial.", "outputs."];

pub fn resolve(raw: &RawConfig, tol: ToleranceSet) -> Result<Scenario, ConfigError> {
    for key in raw.entries.keys() {
        if !KNOWN_PREFIXES.iter().any(|p| key.starts_with(p)) {
            return Err(ConfigError::UnknownKey(key.clone()));
        }
    }
    let model = build_model(raw)?;
    let weights = match raw.get("weights.mu0") {
        None | Some("auto") => WeightPair::auto(&model),
        Some(v) => {
            let mu0: f64 = v.parse().map_err(|_| ConfigError::BadValue {
                key: "weights.mu0".into(),
                why: format!("`{v}` is neither a number nor `auto`"),
            })?;
            WeightPair::derive(&model, mu0)
                .map_err(|e| ConfigError::BadValue { key: "weights.mu0".into(), why: e.to_string() })?
        }
    };

    // grid defaults follow the weighted-norm tails: histories and densities
    // truncated where an O(1) steady profile's tail drops below 1e-8
    let a_auto = sizestruct::delay_engine::norm_age_horizon(weights.mu0, 1e-9);
    let a_max = match raw.get("grids.a_max") {
        None | Some("auto") => a_auto,
        Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
            key: "grids.a_max".into(),
            why: format!("`{v}` is neither a number nor `auto`"),
        })?,
    };
    let x_auto = sizestruct::delay_engine::matched_size_horizon(&model, a_max);
    let x_max = match raw.get("grids.x_max") {
        None | Some("auto") => x_auto,
        Some(v) => v.parse().map_err(|_| ConfigError::BadValue {
            key: "grids.x_max".into(),
            why: format!("`{v}` is neither a number nor `auto`"),
        })?,
    };
    let n_x = raw.usize_opt("grids.n_x")?.unwrap_or(2049);
    let n_a = raw.usize_opt("grids.n_a")?.unwrap_or(1153);
    let dt = raw.f64_opt("grids.dt")?.unwrap_or(1.0 / 256.0);
    if !(x_max > model.x_b) || n_x < 3 || n_a < 3 || !(dt > 0.0) || !(a_max > 0.0) {
        return Err(ConfigError::BadValue {
            key: "grids".into(),
            why: "grids must be positive (x_max > x_b, n_x/n_a >= 3, dt > 0)".into(),
        });
    }
    let horizon = raw.f64_opt("run.horizon")?.unwrap_or(0.0);
    if horizon < 0.0 {
        return Err(ConfigError::BadValue {
            key: "run.horizon".into(),
            why: "horizon must be nonnegative".into(),
        });
    }

    let initial = resolve_initial(raw)?;
    let out_dir = PathBuf::from(raw.get("outputs.dir").unwrap_or("out"));

    let s_bracket = match (raw.f64_opt("run.s_lo")?, raw.f64_opt("run.s_hi")?) {
        (Some(lo), Some(hi)) => Some((lo, hi)),
        (None, None) => None,
        _ => {
            return Err(ConfigError::BadValue {
                key: "run.s_lo/run.s_hi".into(),
                why: "either both or neither bracket end must be given".into(),
            })
        }
    };
    let scan = match (
        raw.f64_opt("run.scan.re_min")?,
        raw.f64_opt("run.scan.re_max")?,
        raw.f64_opt("run.scan.im_max")?,
    ) {
        (Some(re_min), Some(re_max), Some(im_max)) => Some((re_min, re_max, -im_max, im_max)),
        (None, None, None) => None,
        _ => {
            return Err(ConfigError::BadValue {
                key: "run.scan.*".into(),
                why: "scan needs re_min, re_max and im_max together".into(),
            })
        }
    };

    let model_hash = fnv1a(model.label.as_bytes());
    Ok(Scenario {
        model,
        weights,
        x_max,
        n_x,
        a_max,
        n_a,
        disc: TimeDisc::with_dt(dt),
        tol,
        horizon,
        initial,
        out_dir,
        s_bracket,
        scan,
        margin: raw.f64_opt("run.margin")?,
        model_hash,
    })
}

fn resolve_initial(raw: &RawConfig) -> Result<InitialSpec, ConfigError> {
    let parse_expr = |key: &str| -> Result<Expr, ConfigError> {
        Expr::parse(raw.require(key)?).map_err(|e| ConfigError::BadValue {
            key: key.into(),
            why: e.to_string(),
        })
    };
    let decaying = matches!(raw.get("initial.psi_tail"), Some("decaying"));
    let has = |k: &str| raw.get(k).is_some();
    match (
        has("initial.density"),
        has("initial.density_file"),
        has("initial.phi"),
        has("initial.history_file"),
    ) {
        (true, false, false, false) => Ok(InitialSpec::DensityExpr {
            expr: parse_expr("initial.density")?,
            s0: raw.f64_of("initial.s0")?,
        }),
        (false, true, false, false) => Ok(InitialSpec::DensityFile {
            path: PathBuf::from(raw.require("initial.density_file")?),
            s0: raw.f64_of("initial.s0")?,
        }),
        (false, false, true, false) => Ok(InitialSpec::HistoryExpr {
            phi: parse_expr("initial.phi")?,
            psi: parse_expr("initial.psi")?,
            decaying_tail: decaying,
        }),
        (false, false, false, true) => Ok(InitialSpec::HistoryFile {
            path: PathBuf::from(raw.require("initial.history_file")?),
            decaying_tail: decaying,
        }),
        (false, false, false, false) => Ok(InitialSpec::None),
        _ => Err(ConfigError::BadValue {
            key: "initial".into(),
            why: "give exactly one of density, density_file, phi(+psi), history_file".into(),
        }),
    }
}

fn build_model(raw: &RawConfig) -> Result<ModelIngredients, ConfigError> {
    if let Some(family) = raw.get("model.family") {
        let mut params = BTreeMap::new();
        for (key, value) in &raw.entries {
            if let Some(name) = key.strip_prefix("model.param.") {
                let v: f64 = value.parse().map_err(|_| ConfigError::BadValue {
                    key: key.clone(),
                    why: format!("`{value}` is not a number"),
                })?;
                params.insert(name.to_string(), v);
            }
        }
        return builtin_family_by_name(family, &params)
            .map_err(|e| ConfigError::Model(e.to_string()));
    }
    // expression table
    let expr_of = |key: &str| -> Result<Expr, ConfigError> {
        Expr::parse(raw.require(key)?).map_err(|e| ConfigError::BadValue {
            key: key.into(),
            why: e.to_string(),
        })
    };
    let g = expr_of("model.g")?;
    let mu = expr_of("model.mu")?;
    let beta = expr_of("model.beta")?;
    let gamma = expr_of("model.gamma")?;
    let f = expr_of("model.f")?;
    let x_b = raw.f64_of("model.x_b")?;
    let x_bar = raw.f64_of("model.x_bar")?;
    let g_inf = raw.f64_of("model.g_inf")?;
    let mu_hat = raw.f64_of("model.mu_hat")?;
    let g_min = raw.f64_of("model.g_min")?;
    let g_max = raw.f64_of("model.g_max")?;
    let beta_sup = raw.f64_of("model.beta_sup")?;
    let gamma_sup = raw.f64_of("model.gamma_sup")?;
    let sigma_integral = raw.f64_opt("model.sigma_integral")?;
    let lipschitz = match (
        raw.f64_opt("model.lipschitz.g_x")?,
        raw.f64_opt("model.lipschitz.g_s")?,
    ) {
        (Some(gx), Some(gs)) => Some(LipschitzTable {
            g: (gx, gs),
            mu: (
                raw.f64_opt("model.lipschitz.mu_x")?.unwrap_or(0.0),
                raw.f64_opt("model.lipschitz.mu_s")?.unwrap_or(0.0),
            ),
            beta: (
                raw.f64_opt("model.lipschitz.beta_x")?.unwrap_or(0.0),
                raw.f64_opt("model.lipschitz.beta_s")?.unwrap_or(0.0),
            ),
            gamma: (
                raw.f64_opt("model.lipschitz.gamma_x")?.unwrap_or(0.0),
                raw.f64_opt("model.lipschitz.gamma_s")?.unwrap_or(0.0),
            ),
            f: raw.f64_opt("model.lipschitz.f")?.unwrap_or(0.0),
        }),
        _ => None,
    };
    let box_hi_x = raw.f64_opt("model.box_x_hi")?.unwrap_or(x_bar + 5.0);
    let box_hi_s = raw.f64_opt("model.box_s_hi")?.unwrap_or(2.0);
    let mut label = String::from("expr(");
    for key in ["model.g", "model.mu", "model.beta", "model.gamma", "model.f"] {
        label.push_str(raw.get(key).unwrap_or(""));
        label.push(';');
    }
    label.push_str(&format!("x_b={x_b};mu_hat={mu_hat};g_inf={g_inf})"));
    Ok(ModelIngredients {
        g: Arc::new(move |x, s| g.eval(x, s)),
        mu: Arc::new(move |x, s| mu.eval(x, s)),
        beta: Arc::new(move |x, s| beta.eval(x, s)),
        gamma: Arc::new(move |x, s| gamma.eval(x, s)),
        f: Arc::new(move |s| f.eval(0.0, s)),
        x_b,
        x_bar,
        g_inf,
        mu_hat,
        sigma_integral,
        sigma: None,
        g_min,
        g_max,
        beta_sup,
        gamma_sup,
        lipschitz,
        hypothesis_box: Some(((x_b, box_hi_x), (0.0, box_hi_s))),
        label,
    })
}

/// FNV-1a, used to stamp outputs with a stable model fingerprint.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Tolerance profile from the environment (`SIZESTRUCT_TOLERANCES`).
pub fn tolerances_from_env() -> Result<ToleranceSet, ConfigError> {
    match std::env::var("SIZESTRUCT_TOLERANCES").as_deref() {
        Ok("fast") => Ok(ToleranceSet::fast()),
        Ok("strict") => Ok(ToleranceSet::strict()),
        Ok("default") | Err(_) => Ok(ToleranceSet::default()),
        Ok(other) => Err(ConfigError::BadValue {
            key: "SIZESTRUCT_TOLERANCES".into(),
            why: format!("`{other}` is not one of default, fast, strict"),
        }),
    }
}
