//! Configuration-driven front end: define a model, run either semigroup,
//! convert states between the two formulations, compute steady states and
//! spectra, or run the built-in validation suite. Outputs are CSV files plus
//! short human-readable reports; runs are deterministic for a fixed config.

mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sizestruct::delay_engine::{self, HistoryState, PsiTail};
use sizestruct::equilibrium;
use sizestruct::ingredients::check_hypotheses;
use sizestruct::intertwine;
use sizestruct::numerics::{ComplexRect, Grid1D, SampledFn};
use sizestruct::pde_engine::{self, DensityState};
use sizestruct::spectral::{self, Verdict};

use config::{InitialSpec, RawConfig, Scenario};
use output::Stamp;

#[derive(Parser)]
#[command(
    name = "sizestruct",
    version,
    about = "Size-structured consumer-resource dynamics: simulation, state conversion, steady states and linearised stability"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Advance a density state with the PDE-side semigroup.
    #[command(name = "simulate-pde")]
    SimulatePde(RunArgs),
    /// Advance a history pair with the delay-side semigroup.
    #[command(name = "simulate-de")]
    SimulateDe(RunArgs),
    /// Convert a density to a history (pseudo-inverse) or back.
    Convert(RunArgs),
    /// Solve R(S*) = 1 and emit the steady state(s).
    Steady(RunArgs),
    /// Locate characteristic roots at a steady state and render the verdict.
    Spectrum(RunArgs),
    /// Run the built-in invariant checks for the configured model.
    Validate(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario configuration file (flat key = value lines).
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `outputs.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. --override grids.n_x=513 (repeatable).
    #[arg(long = "override", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

/// Exit codes: 0 ok, 2 config error, 3 numerical failure, 4 hypothesis-check
/// failure.
enum RunError {
    Config(String),
    Numerical(String),
    Hypotheses(String),
}

impl RunError {
    fn code(&self) -> u8 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Hypotheses(_) => 4,
        }
    }

    fn message(&self) -> &str {
        match self {
            RunError::Config(m) | RunError::Numerical(m) | RunError::Hypotheses(m) => m,
        }
    }
}

impl From<config::ConfigError> for RunError {
    fn from(e: config::ConfigError) -> Self {
        RunError::Config(e.to_string())
    }
}

impl From<output::OutputError> for RunError {
    fn from(e: output::OutputError) -> Self {
        match e {
            output::OutputError::Malformed { .. } => RunError::Config(e.to_string()),
            output::OutputError::Io(..) => RunError::Numerical(e.to_string()),
        }
    }
}

fn numerical(e: impl std::fmt::Display) -> RunError {
    RunError::Numerical(e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (args, run): (&RunArgs, fn(&Scenario) -> Result<Vec<PathBuf>, RunError>) = match &cli.cmd {
        Cmd::SimulatePde(a) => (a, run_simulate_pde),
        Cmd::SimulateDe(a) => (a, run_simulate_de),
        Cmd::Convert(a) => (a, run_convert),
        Cmd::Steady(a) => (a, run_steady),
        Cmd::Spectrum(a) => (a, run_spectrum),
        Cmd::Validate(a) => (a, run_validate),
    };
    match prepare(args).and_then(|sc| {
        let artifacts = run(&sc)?;
        Ok((sc, artifacts))
    }) {
        Ok((_, artifacts)) => {
            for p in artifacts {
                println!("wrote {}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {}", e.message());
            ExitCode::from(e.code())
        }
    }
}

fn prepare(args: &RunArgs) -> Result<Scenario, RunError> {
    let tol = config::tolerances_from_env()?;
    let mut raw = RawConfig::load(&args.config)?;
    for ov in &args.overrides {
        raw.apply_override(ov)?;
    }
    let mut sc = config::resolve(&raw, tol)?;
    if let Some(out) = &args.out {
        sc.out_dir = out.clone();
    }
    Ok(sc)
}

fn stamp(sc: &Scenario) -> Stamp {
    Stamp {
        model_hash: sc.model_hash,
        grid_note: format!(
            "grids: x_max = {}, n_x = {}, a_max = {}, n_a = {}, dt = {}",
            sc.x_max, sc.n_x, sc.a_max, sc.n_a, sc.disc.dt
        ),
    }
}

fn x_grid(sc: &Scenario) -> Result<Grid1D, RunError> {
    Grid1D::uniform(sc.model.x_b, sc.x_max, sc.n_x, sc.weights.kappa0).map_err(numerical)
}

fn a_grid(sc: &Scenario) -> Result<Grid1D, RunError> {
    Grid1D::uniform(0.0, sc.a_max, sc.n_a, sc.weights.mu0).map_err(numerical)
}

fn initial_density(sc: &Scenario) -> Result<DensityState, RunError> {
    match &sc.initial {
        InitialSpec::DensityExpr { expr, s0 } => {
            let grid = x_grid(sc)?;
            let vals: Vec<f64> =
                grid.nodes().iter().map(|&x| expr.eval(x, *s0).max(0.0)).collect();
            DensityState::new(grid, vals, *s0, sc.weights.kappa0, 0.0).map_err(numerical)
        }
        InitialSpec::DensityFile { path, s0 } => {
            Ok(output::read_density(path, *s0, sc.weights.kappa0)?)
        }
        _ => Err(RunError::Config(
            "this mode needs an initial density (initial.density or initial.density_file)".into(),
        )),
    }
}

fn initial_history(sc: &Scenario) -> Result<HistoryState, RunError> {
    match &sc.initial {
        InitialSpec::HistoryExpr { phi, psi, decaying_tail } => {
            let grid = a_grid(sc)?;
            let phi_v: Vec<f64> = grid.nodes().iter().map(|&a| phi.eval(a, 0.0).max(0.0)).collect();
            let psi_v: Vec<f64> = grid.nodes().iter().map(|&a| psi.eval(a, 0.0).max(0.0)).collect();
            HistoryState::new(
                grid,
                phi_v,
                psi_v,
                sc.weights.mu0,
                0.0,
                if *decaying_tail { PsiTail::Decaying } else { PsiTail::ConstantExtension },
            )
            .map_err(numerical)
        }
        InitialSpec::HistoryFile { path, decaying_tail } => {
            Ok(output::read_history(path, sc.weights.mu0, *decaying_tail)?)
        }
        _ => Err(RunError::Config(
            "this mode needs an initial history (initial.phi/initial.psi or initial.history_file)"
                .into(),
        )),
    }
}

fn run_simulate_pde(sc: &Scenario) -> Result<Vec<PathBuf>, RunError> {
    let state = initial_density(sc)?;
    let st = stamp(sc);
    if sc.horizon == 0.0 {
        let ts = SampledFn::new(vec![0.0, 1.0], vec![state.s0, state.s0]);
        let bs = SampledFn::new(vec![0.0, 1.0], vec![0.0, 0.0]);
        return Ok(vec![
            output::write_density(&sc.out_dir, "density_final.csv", &state, &st)?,
            output::write_trajectory(&sc.out_dir, "trajectory.csv", &ts, &bs, &st)?,
        ]);
    }
    let bundle = pde_engine::picard_resource(&state, sc.horizon, &sc.model, &sc.tol, &sc.disc)
        .map_err(numerical)?;
    let s = SampledFn::new(bundle.env.t_grid.nodes().to_vec(), bundle.env.values.clone());
    Ok(vec![
        output::write_density(&sc.out_dir, "density_final.csv", &bundle.n_final, &st)?,
        output::write_trajectory(&sc.out_dir, "trajectory.csv", &s, &bundle.birth, &st)?,
    ])
}

fn run_simulate_de(sc: &Scenario) -> Result<Vec<PathBuf>, RunError> {
    let h = initial_history(sc)?;
    let st = stamp(sc);
    let grid = x_grid(sc)?;
    let (out, b, s) = delay_engine::evolve_history_detailed(
        &h, sc.horizon, &sc.model, &grid, &sc.tol, &sc.disc,
    )
    .map_err(numerical)?;
    Ok(vec![
        output::write_history(&sc.out_dir, "history_final.csv", &out, &st)?,
        output::write_trajectory(&sc.out_dir, "trajectory.csv", &s, &b, &st)?,
    ])
}

fn run_convert(sc: &Scenario) -> Result<Vec<PathBuf>, RunError> {
    let st = stamp(sc);
    match &sc.initial {
        InitialSpec::DensityExpr { .. } | InitialSpec::DensityFile { .. } => {
            let state = initial_density(sc)?;
            let h = intertwine::map_l_inv(&state, &sc.model).map_err(numerical)?;
            Ok(vec![output::write_history(&sc.out_dir, "history.csv", &h, &st)?])
        }
        InitialSpec::HistoryExpr { .. } | InitialSpec::HistoryFile { .. } => {
            let h = initial_history(sc)?;
            let grid = x_grid(sc)?;
            let state = intertwine::map_l(&h, &sc.model, &grid).map_err(numerical)?;
            Ok(vec![output::write_density(&sc.out_dir, "density.csv", &state, &st)?])
        }
        InitialSpec::None => Err(RunError::Config(
            "convert needs an initial density or history".into(),
        )),
    }
}

fn steady_states(sc: &Scenario) -> Result<Vec<equilibrium::SteadyState>, RunError> {
    let grid = x_grid(sc)?;
    match sc.s_bracket {
        Some(bracket) => equilibrium::solve_steady(&sc.model, bracket, &grid, &sc.tol)
            .map(|s| vec![s])
            .map_err(numerical),
        None => equilibrium::find_steady_states(&sc.model, &grid, &sc.tol).map_err(numerical),
    }
}

fn run_steady(sc: &Scenario) -> Result<Vec<PathBuf>, RunError> {
    let states = steady_states(sc)?;
    let st = stamp(sc);
    let mut summary = format!(
        "# sizestruct steady\n# model_hash = {:016x}\ns_star,b_star,r_value,lifetime_consumption,degenerate\n",
        sc.model_hash
    );
    let mut artifacts = Vec::new();
    for (i, ss) in states.iter().enumerate() {
        summary.push_str(&format!(
            "{},{},{},{},{}\n",
            ss.s_star, ss.b_star, ss.r_value, ss.lifetime_consumption, ss.degenerate as u8
        ));
        let density = DensityState::new(
            ss.x_grid.with_weight(sc.weights.kappa0),
            ss.n_star.clone(),
            ss.s_star,
            sc.weights.kappa0,
            0.0,
        )
        .map_err(numerical)?;
        artifacts.push(output::write_density(
            &sc.out_dir,
            &format!("steady_density_{i}.csv"),
            &density,
            &st,
        )?);
    }
    artifacts.insert(0, output::write_report(&sc.out_dir, "steady.csv", &summary)?);
    Ok(artifacts)
}

fn run_spectrum(sc: &Scenario) -> Result<Vec<PathBuf>, RunError> {
    let states = steady_states(sc)?;
    let ss = &states[0];
    let scan = sc
        .scan
        .map(|(re_min, re_max, im_min, im_max)| ComplexRect::new(re_min, re_max, im_min, im_max));
    let report =
        spectral::analyze_stability(ss, &sc.model, &sc.weights, scan, sc.margin, &sc.tol)
            .map_err(|e| match e {
                spectral::SpectralError::SmoothnessFailure(list) => {
                    RunError::Hypotheses(format!("smoothness hypotheses failed: {list:?}"))
                }
                other => numerical(other),
            })?;
    let st = stamp(sc);
    let mut body = String::new();
    body.push_str(&format!("steady state: S* = {}, b* = {}\n", ss.s_star, ss.b_star));
    body.push_str(&format!("R'(S*) = {}\n", report.r_prime));
    body.push_str(&format!(
        "verdict: {}\n",
        match report.verdict {
            Verdict::AsymptoticallyStable => "asymptotically stable (rectangle-conditional)",
            Verdict::Unstable => "unstable",
            Verdict::Inconclusive => "inconclusive",
        }
    ));
    if let Some(r) = report.rightmost_real_part {
        body.push_str(&format!("rightmost root real part: {r}\n"));
    }
    body.push_str(&format!(
        "scan: Re in [{}, {}], Im in [{}, {}] (derived bounds: Lambda = {}, Omega = {})\n",
        report.scan.re_min,
        report.scan.re_max,
        report.scan.im_min,
        report.scan.im_max,
        report.lambda_bound,
        report.omega_bound
    ));
    body.push_str(&format!("margin: {}\n", report.margin));
    body.push_str(&format!("instability shortcut: {}\n", report.instability_shortcut));
    for n in &report.notes {
        body.push_str(&format!("note: {n}\n"));
    }
    println!("{body}");
    Ok(vec![
        output::write_spectrum(&sc.out_dir, "spectrum.csv", &report.roots, &report.notes, &st)?,
        output::write_report(&sc.out_dir, "stability.txt", &body)?,
    ])
}

struct Check {
    name: &'static str,
    passed: bool,
    detail: String,
    hypothesis: bool,
}

fn run_validate(sc: &Scenario) -> Result<Vec<PathBuf>, RunError> {
    let m = &sc.model;
    let mut checks: Vec<Check> = Vec::new();
    let dx = (sc.x_max - m.x_b) / (sc.n_x - 1) as f64;
    let budget = sc.disc.dt * sc.disc.dt + dx * dx;

    // 1. hypotheses on the documented box
    let bx = m.hypothesis_box.unwrap_or(((m.x_b, m.x_bar + 5.0), (0.0, 2.0)));
    let report = check_hypotheses(m, bx, 15);
    let failures: Vec<String> =
        report.failures().map(|c| format!("{} ({})", c.name, c.note)).collect();
    checks.push(Check {
        name: "hypotheses",
        passed: failures.is_empty(),
        detail: if failures.is_empty() {
            format!("{} checks on box {:?} ({})", report.checks.len(), bx, report.caveat)
        } else {
            failures.join("; ")
        },
        hypothesis: true,
    });

    // 2. survival bounds on structured sample draws
    match m.survival_bounds() {
        Ok((c_lo, c_hi)) => {
            let mut worst: f64 = 0.0;
            let mut rng: u64 = 0x9e3779b97f4a7c15;
            let mut next = || {
                rng ^= rng << 13;
                rng ^= rng >> 7;
                rng ^= rng << 17;
                (rng >> 11) as f64 / (1u64 << 53) as f64
            };
            let mut ok = true;
            for _ in 0..50 {
                let amp = next();
                let freq = 0.2 + 2.0 * next();
                let env = sizestruct::characteristics::EnvironmentTrajectory::from_fn(
                    0.0,
                    8.0,
                    257,
                    |t| (1.0 + amp * (freq * t).sin()).abs(),
                )
                .map_err(numerical)?;
                let s = 6.0 * next();
                let t = s + 2.0 * next();
                let f = sizestruct::characteristics::survival(&env, t, s, m.x_b, m)
                    .map_err(numerical)?;
                let decay = (-m.mu_hat * (t - s)).exp();
                let lo = c_lo * decay * (1.0 - 1e-6);
                let hi = c_hi * decay * (1.0 + 1e-6);
                if f < lo || f > hi {
                    ok = false;
                    worst = worst.max((lo - f).max(f - hi));
                }
            }
            checks.push(Check {
                name: "survival_bounds",
                passed: ok,
                detail: format!("50 draws within [c, C] e^(-mu_hat dt); worst excess {worst:.3e}"),
                hypothesis: false,
            });
        }
        Err(e) => checks.push(Check {
            name: "survival_bounds",
            passed: false,
            detail: e.to_string(),
            hypothesis: true,
        }),
    }

    // 3. steady state and the R(S*) = 1 anchor
    let steady = steady_states(sc);
    match &steady {
        Ok(states) => {
            let ss = &states[0];
            checks.push(Check {
                name: "steady_state",
                passed: (ss.r_value - 1.0).abs() <= 10.0 * sc.tol.root_tol,
                detail: format!(
                    "S* = {:.6}, b* = {:.6}, |R - 1| = {:.3e}",
                    ss.s_star,
                    ss.b_star,
                    (ss.r_value - 1.0).abs()
                ),
                hypothesis: false,
            });
        }
        Err(e) => checks.push(Check {
            name: "steady_state",
            passed: false,
            detail: e.message().to_string(),
            hypothesis: false,
        }),
    }

    if let Ok(states) = &steady {
        let ss = &states[0];
        let grid = x_grid(sc)?;
        // 4. pseudo-inverse round trip on the steady profile
        let density = DensityState::new(
            grid.clone(),
            equilibrium::steady_density_profile(m, ss.s_star, ss.b_star, &grid),
            ss.s_star,
            sc.weights.kappa0,
            0.0,
        )
        .map_err(numerical)?;
        match intertwine::map_l_inv(&density, m)
            .and_then(|h| intertwine::map_l(&h, m, &grid))
        {
            Ok(back) => {
                let d = pde_engine::state_distance(&back, &density);
                let bound = 5.0 * budget * (1.0 + density.state_norm());
                checks.push(Check {
                    name: "pseudo_inverse",
                    passed: d <= bound,
                    detail: format!("round trip distance {d:.3e} vs budget {bound:.3e}"),
                    hypothesis: false,
                });
            }
            Err(e) => checks.push(Check {
                name: "pseudo_inverse",
                passed: false,
                detail: e.to_string(),
                hypothesis: false,
            }),
        }

        // 5. steady history is a fixed point over one unit of time
        if ss.b_star > 0.0 {
            let h = HistoryState::constant(ss.b_star, ss.s_star, sc.weights.mu0, sc.a_max, sc.n_a)
                .map_err(numerical)?;
            match delay_engine::evolve_history(&h, 1.0, m, &grid, &sc.tol, &sc.disc) {
                Ok(out) => {
                    let d = delay_engine::history_distance(&out, &h);
                    let bound = 5.0 * budget * (1.0 + ss.b_star + ss.s_star);
                    checks.push(Check {
                        name: "steady_fixed_point",
                        passed: d <= bound,
                        detail: format!("drift {d:.3e} vs budget {bound:.3e}"),
                        hypothesis: false,
                    });
                    // 6. intertwining discrepancy at t = 1
                    match intertwine::check_intertwining(&h, 1.0, m, &grid, &sc.tol, &sc.disc) {
                        Ok(di) => {
                            let bound = 5.0 * budget * (1.0 + density.state_norm());
                            checks.push(Check {
                                name: "intertwining",
                                passed: di <= bound,
                                detail: format!("discrepancy {di:.3e} vs budget {bound:.3e}"),
                                hypothesis: false,
                            });
                        }
                        Err(e) => checks.push(Check {
                            name: "intertwining",
                            passed: false,
                            detail: e.to_string(),
                            hypothesis: false,
                        }),
                    }
                }
                Err(e) => checks.push(Check {
                    name: "steady_fixed_point",
                    passed: false,
                    detail: e.to_string(),
                    hypothesis: false,
                }),
            }
        }
    }

    let mut body = String::new();
    for c in &checks {
        body.push_str(&format!(
            "{} {:<20} {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    print!("{body}");
    let artifact = output::write_report(&sc.out_dir, "validate.txt", &body)?;
    if checks.iter().any(|c| !c.passed && c.hypothesis) {
        return Err(RunError::Hypotheses("hypothesis checks failed (see validate.txt)".into()));
    }
    if checks.iter().any(|c| !c.passed) {
        return Err(RunError::Numerical("validation checks failed (see validate.txt)".into()));
    }
    Ok(vec![artifact])
}
