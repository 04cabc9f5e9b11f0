//! Acceptance suite: one test per criterion, each printing a PASS line with
//! the measured values (run with `--nocapture` to see them).
//!
//! Every tolerance is pinned here. The shared grid budget for a run at time
//! step `dt` and size step `dx` is `dt^2 + dx^2` (both schemes are second
//! order); criteria quoted against "5x grid budget" use that.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use sizestruct::characteristics::{self, EnvironmentTrajectory};
use sizestruct::delay_engine::{self, HistoryState, PsiTail};
use sizestruct::equilibrium;
use sizestruct::ingredients::{builtin_family, BuiltinFamily, ModelIngredients, WeightPair};
use sizestruct::intertwine;
use sizestruct::numerics::{volterra2_solve, Grid1D, ToleranceSet};
use sizestruct::pde_engine::{self, DensityState, TimeDisc};
use sizestruct::spectral;

fn params(pairs: &[(&str, f64)]) -> BTreeMap<String, f64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

fn constant_family() -> ModelIngredients {
    builtin_family(
        BuiltinFamily::ConstantCoefficient,
        &params(&[("beta0", 2.0), ("mu_hat", 1.0), ("gamma0", 1.0), ("g0", 1.0), ("x_b", 1.0)]),
    )
    .unwrap()
}

fn daphnia_family() -> ModelIngredients {
    builtin_family(
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
    .unwrap()
}

fn instability_family() -> ModelIngredients {
    builtin_family(
        BuiltinFamily::InstabilityDemo,
        &params(&[("beta0", 0.75), ("mu_hat", 1.0), ("gamma0", 1.0), ("x_b", 1.0)]),
    )
    .unwrap()
}

fn grid_budget(dt: f64, dx: f64) -> f64 {
    dt * dt + dx * dx
}

/// Matched horizons for weighted-norm work: ages to where an O(1) history
/// tail drops below 1e-9 of scale, sizes to the image of that age span.
fn matched_grids(m: &ModelIngredients, w: &WeightPair, n_x: usize, n_a: usize) -> (Grid1D, Grid1D) {
    let a_max = delay_engine::norm_age_horizon(w.mu0, 1e-9);
    let x_max = delay_engine::matched_size_horizon(m, a_max);
    (
        Grid1D::uniform(m.x_b, x_max, n_x, w.kappa0).unwrap(),
        Grid1D::uniform(0.0, a_max, n_a, w.mu0).unwrap(),
    )
}

// criterion 1 -----------------------------------------------------------

#[test]
fn acceptance_01_constant_coefficient_closed_forms() {
    let tol = ToleranceSet::default();
    // generic parameters, closed forms: S* = mu/beta0, b* = f(S*) mu/gamma0,
    // n*(x) = b*/g e^{-mu (x - x_b)/g}
    let cases = [
        (2.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0),
        (3.0, 1.2, 0.7, 0.8, 0.5, 1.3, 1.1),
    ];
    for (beta0, mu_hat, gamma0, g0, x_b, r, cap) in cases {
        let m = builtin_family(
            BuiltinFamily::ConstantCoefficient,
            &params(&[
                ("beta0", beta0),
                ("mu_hat", mu_hat),
                ("gamma0", gamma0),
                ("g0", g0),
                ("x_b", x_b),
                ("resource_rate", r),
                ("resource_cap", cap),
            ]),
        )
        .unwrap();
        let s_expect = mu_hat / beta0;
        let b_expect = r * (cap - s_expect) * mu_hat / gamma0;
        let grid = Grid1D::uniform(x_b, x_b + 25.0 * g0 / mu_hat, 501, 0.0).unwrap();
        let ss = equilibrium::solve_steady(&m, (s_expect * 0.1, s_expect * 5.0), &grid, &tol)
            .unwrap();
        let rel_s = (ss.s_star - s_expect).abs() / s_expect;
        let rel_b = (ss.b_star - b_expect).abs() / b_expect;
        assert!(rel_s <= 1e-8, "S* relative error {rel_s}");
        assert!(rel_b <= 1e-8, "b* relative error {rel_b}");
        let mut worst_n = 0.0f64;
        for (k, &x) in grid.nodes().iter().enumerate() {
            let expect = b_expect / g0 * (-mu_hat * (x - x_b) / g0).exp();
            worst_n = worst_n.max((ss.n_star[k] - expect).abs() / expect);
        }
        assert!(worst_n <= 1e-8, "n* relative error {worst_n}");
        println!(
            "ACCEPTANCE 1 PASS constant-coefficient closed forms (beta0={beta0}): |dS*|/S*={rel_s:.2e}, |db*|/b*={rel_b:.2e}, |dn*|/n*={worst_n:.2e} (tol 1e-8)"
        );
    }
}

// criterion 2 -----------------------------------------------------------

#[test]
fn acceptance_02_renewal_solver_oracle() {
    // kernel beta0 s_bar e^{-mu (t-s)}, forcing beta0 s_bar P0 e^{-mu t}:
    // b(t) = beta0 s_bar P0 e^{(beta0 s_bar - mu) t}
    let (beta0, s_bar, mu, p0) = (2.0, 0.75, 1.0, 0.9);
    let horizon = 5.0;
    let err_at = |n: usize| -> f64 {
        let grid = Grid1D::uniform(0.0, horizon, n + 1, 0.0).unwrap();
        let forcing: Vec<f64> =
            grid.nodes().iter().map(|&t| beta0 * s_bar * p0 * (-mu * t).exp()).collect();
        let b = volterra2_solve(
            |t, s| beta0 * s_bar * (-mu * (t - s)).exp(),
            &forcing,
            &grid,
        )
        .unwrap();
        let rate = beta0 * s_bar - mu;
        b.iter()
            .zip(grid.nodes())
            .map(|(&bv, &t)| {
                let expect = beta0 * s_bar * p0 * (rate * t).exp();
                (bv - expect).abs() / expect
            })
            .fold(0.0, f64::max)
    };
    let e1 = err_at(1280);
    let e2 = err_at(2560);
    let ratio = e1 / e2;
    assert!(e2 < 1e-5, "fine-grid relative error {e2}");
    assert!(
        (3.5..=4.5).contains(&ratio),
        "halving-h error ratio {ratio} outside [3.5, 4.5] (e1={e1:.3e}, e2={e2:.3e})"
    );
    println!(
        "ACCEPTANCE 2 PASS renewal closed form: errors {e1:.3e} -> {e2:.3e}, ratio {ratio:.2} in [3.5, 4.5]"
    );
}

// criterion 3 -----------------------------------------------------------

#[test]
fn acceptance_03_pseudo_inverse_round_trips() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (name, m) in [
        ("constant_coefficient", constant_family()),
        ("daphnia_vonbertalanffy", daphnia_family()),
        ("instability_demo", instability_family()),
    ] {
        let w = WeightPair::auto(&m);
        let n_x = 257;
        let x_max = m.x_b + 20.0 * m.g_max / m.mu_hat.max(0.5);
        let grid = Grid1D::uniform(m.x_b, x_max, n_x, w.kappa0).unwrap();
        let dx = (x_max - m.x_b) / (n_x - 1) as f64;
        let budget = 5.0 * grid_budget(0.0, dx);
        let mut worst = 0.0f64;
        for _ in 0..50 {
            let c1: f64 = 0.3 + rng.gen::<f64>();
            let c2: f64 = rng.gen::<f64>() * 2.0;
            let decay = (0.3 + rng.gen::<f64>()) * m.mu_hat / m.g_max;
            let vals: Vec<f64> = grid
                .nodes()
                .iter()
                .map(|&x| (1.0 + c2 * (c1 * x).sin().powi(2)) * (-decay * (x - m.x_b)).exp())
                .collect();
            let st =
                DensityState::new(grid.clone(), vals, 0.2 + rng.gen::<f64>(), w.kappa0, 0.0)
                    .unwrap();
            let back = intertwine::map_l(&intertwine::map_l_inv(&st, &m).unwrap(), &m, &grid)
                .unwrap();
            let d = pde_engine::state_distance(&back, &st) / (1.0 + st.state_norm());
            worst = worst.max(d);
        }
        assert!(
            worst <= budget,
            "{name}: worst round-trip error {worst:.3e} exceeds 5x budget {budget:.3e}"
        );
        println!(
            "ACCEPTANCE 3 PASS pseudo-inverse round trip ({name}): worst {worst:.3e} <= {budget:.3e} over 50 random densities"
        );
    }
}

// criterion 4 -----------------------------------------------------------

fn wavy_history(w: &WeightPair, a_grid: &Grid1D) -> HistoryState {
    let phi: Vec<f64> = a_grid
        .nodes()
        .iter()
        .map(|&a| (0.4 + 0.2 * (0.8 * a).sin().abs()) * (-w.mu0 * 0.02 * a).exp())
        .collect();
    let psi: Vec<f64> =
        a_grid.nodes().iter().map(|&a| 0.5 + 0.15 * (0.5 * a).cos()).collect();
    let a_max = a_grid.last();
    // tail of the phi envelope: |phi| <= 0.6 e^{-0.02 mu0 a}
    let tail = 0.6 * (-(1.02) * w.mu0 * a_max).exp() / (1.02 * w.mu0);
    HistoryState::new(a_grid.clone(), phi, psi, w.mu0, tail, PsiTail::ConstantExtension).unwrap()
}

#[test]
fn acceptance_04_intertwining() {
    let m = constant_family();
    let w = WeightPair::auto(&m);
    let tol = ToleranceSet::default();

    // coarse pass over the ladder
    let (x_coarse, a_coarse) = matched_grids(&m, &w, 1025, 577);
    let h_coarse = wavy_history(&w, &a_coarse);
    let dt1 = 1.0 / 128.0;
    let dx1 = (x_coarse.last() - x_coarse.first()) / (x_coarse.len() - 1) as f64;
    let budget1 = grid_budget(dt1, dx1);
    let mut d_t1 = 0.0;
    for t in [0.5, 1.0, 2.0] {
        let d = intertwine::check_intertwining(
            &h_coarse,
            t,
            &m,
            &x_coarse,
            &tol,
            &TimeDisc::with_dt(dt1),
        )
        .unwrap();
        assert!(
            d <= 5.0 * budget1,
            "intertwining discrepancy {d:.3e} at t={t} exceeds 5x budget {:.3e}",
            5.0 * budget1
        );
        if t == 1.0 {
            d_t1 = d;
        }
        println!("ACCEPTANCE 4 PASS intertwining at t={t}: {d:.3e} <= {:.3e}", 5.0 * budget1);
    }

    // refinement at t = 1: halving both steps must shrink the discrepancy
    // at a second-order-ish rate
    let (x_fine, a_fine) = matched_grids(&m, &w, 2049, 1153);
    let h_fine = wavy_history(&w, &a_fine);
    let d_fine = intertwine::check_intertwining(
        &h_fine,
        1.0,
        &m,
        &x_fine,
        &tol,
        &TimeDisc::with_dt(dt1 / 2.0),
    )
    .unwrap();
    let ratio = d_t1 / d_fine;
    assert!(
        ratio >= 2.0,
        "refinement ratio {ratio:.2} too small (coarse {d_t1:.3e}, fine {d_fine:.3e})"
    );
    println!(
        "ACCEPTANCE 4 PASS intertwining refinement: {d_t1:.3e} -> {d_fine:.3e} (ratio {ratio:.2} >= 2)"
    );
}

// criterion 5 -----------------------------------------------------------

#[test]
fn acceptance_05_equivalence_contraction() {
    let m = constant_family();
    let w = WeightPair::auto(&m);
    let tol = ToleranceSet::default();
    let (x_grid, a_grid) = matched_grids(&m, &w, 1025, 577);
    let h1 = wavy_history(&w, &a_grid);
    let h2 = intertwine::map_l_inv(&intertwine::map_l(&h1, &m, &x_grid).unwrap(), &m).unwrap();
    let d0 = delay_engine::history_distance(&h1, &h2);
    assert!(d0 > 1e-2, "equivalent pair too close ({d0}) for a meaningful ratio");
    let disc = TimeDisc::with_dt(1.0 / 256.0);
    for t in [0.25, 0.5, 1.0, 2.0] {
        let e1 = delay_engine::evolve_history(&h1, t, &m, &x_grid, &tol, &disc).unwrap();
        let e2 = delay_engine::evolve_history(&h2, t, &m, &x_grid, &tol, &disc).unwrap();
        let dt_dist = delay_engine::history_distance(&e1, &e2);
        let bound = (-w.mu0 * t).exp() * (1.0 + 1e-6);
        let ratio = dt_dist / d0;
        assert!(
            ratio <= bound,
            "contraction ratio {ratio} at t={t} exceeds e^(-mu0 t)(1+1e-6) = {bound}"
        );
        println!(
            "ACCEPTANCE 5 PASS equivalence contraction t={t}: ratio {ratio:.6} <= {bound:.6}"
        );
    }
}

// criterion 6 -----------------------------------------------------------

#[test]
fn acceptance_06_steady_states_are_fixed_points() {
    let m = constant_family();
    let w = WeightPair::auto(&m);
    let tol = ToleranceSet::default();
    let (x_grid, _) = matched_grids(&m, &w, 2049, 1153);
    let ss = equilibrium::solve_steady(&m, (0.05, 5.0), &x_grid, &tol).unwrap();
    let disc = TimeDisc::with_dt(1.0 / 1024.0);
    let horizon = 5.0;

    // density side
    let state = DensityState::new(
        x_grid.clone(),
        ss.n_star.clone(),
        ss.s_star,
        w.kappa0,
        // exact weighted tail of the steady profile beyond the grid:
        // b* e^{kappa0 x_b} e^{(kappa0 - 1)(x_max - x_b)} / (1 - kappa0)
        ss.b_star * (w.kappa0 * m.x_b).exp()
            * ((w.kappa0 - 1.0) * (x_grid.last() - m.x_b)).exp()
            / (1.0 - w.kappa0),
    )
    .unwrap();
    let evolved = pde_engine::evolve(&state, horizon, &m, &tol, &disc).unwrap();
    let reference = DensityState::new(
        evolved.x_grid.clone(),
        equilibrium::steady_density_profile(&m, ss.s_star, ss.b_star, &evolved.x_grid),
        ss.s_star,
        w.kappa0,
        evolved.tail_mass,
    )
    .unwrap();
    let drift_pde = pde_engine::state_distance(&evolved, &reference);
    assert!(drift_pde <= 1e-6, "PDE-side steady drift {drift_pde:.3e} over horizon {horizon}");

    // delay side
    let a_max = delay_engine::norm_age_horizon(w.mu0, 1e-9);
    let h = HistoryState::constant(ss.b_star, ss.s_star, w.mu0, a_max, 1153).unwrap();
    let evolved_h =
        delay_engine::evolve_history(&h, horizon, &m, &x_grid, &tol, &disc).unwrap();
    let reference_h =
        HistoryState::constant(ss.b_star, ss.s_star, w.mu0, a_max + horizon, 1153).unwrap();
    let drift_de = delay_engine::history_distance(&evolved_h, &reference_h);
    assert!(drift_de <= 1e-6, "delay-side steady drift {drift_de:.3e} over horizon {horizon}");
    println!(
        "ACCEPTANCE 6 PASS steady fixed points over horizon {horizon}: PDE drift {drift_pde:.3e}, delay drift {drift_de:.3e} (tol 1e-6)"
    );
}

// criterion 7 -----------------------------------------------------------

#[test]
fn acceptance_07_characteristic_equation_anchors() {
    let tol = ToleranceSet::default();
    // m11(0) = 0 at every steady state of the spectral-eligible families
    for (name, m, bracket) in [
        ("constant_coefficient", constant_family(), (0.05, 5.0)),
        (
            "constant_coefficient_b",
            builtin_family(
                BuiltinFamily::ConstantCoefficient,
                &params(&[
                    ("beta0", 3.0),
                    ("mu_hat", 1.2),
                    ("gamma0", 0.7),
                    ("g0", 0.8),
                    ("x_b", 0.5),
                ]),
            )
            .unwrap(),
            (0.05, 5.0),
        ),
        ("instability_demo", instability_family(), (0.1, 1.5)),
    ] {
        let grid = Grid1D::uniform(m.x_b, m.x_b + 20.0 * m.g_max / m.mu_hat, 257, 0.0).unwrap();
        let ss = equilibrium::solve_steady(&m, bracket, &grid, &tol).unwrap();
        let data = spectral::build_char_data(&ss, &m).unwrap();
        let e = spectral::char_det(num_complex::Complex64::new(0.0, 0.0), &data, &m).unwrap();
        assert!(
            e.m11.norm() <= 10.0 * tol.root_tol,
            "{name}: |m11(0)| = {:.3e} exceeds 10 root_tol",
            e.m11.norm()
        );
        println!(
            "ACCEPTANCE 7 PASS m11(0) anchor ({name}): |m11(0)| = {:.3e} <= {:.1e}",
            e.m11.norm(),
            10.0 * tol.root_tol
        );
    }

    // constant-coefficient roots against the rational oracle
    // det = (lambda^2 + lambda + q)/(lambda + mu), q = b* beta0 gamma0/mu = 1
    let m = constant_family();
    let grid = Grid1D::uniform(1.0, 21.0, 257, 0.0).unwrap();
    let ss = equilibrium::solve_steady(&m, (0.05, 5.0), &grid, &tol).unwrap();
    let w = WeightPair::auto(&m);
    let report = spectral::analyze_stability(&ss, &m, &w, None, None, &tol).unwrap();
    assert_eq!(report.roots.len(), 2, "expected the conjugate oracle pair");
    let s3 = 3f64.sqrt() / 2.0;
    for r in &report.roots {
        let oracle = num_complex::Complex64::new(-0.5, s3.copysign(r.z.im));
        assert!(
            (r.z - oracle).norm() <= 1e-6,
            "root {} differs from oracle {oracle} by {:.3e}",
            r.z,
            (r.z - oracle).norm()
        );
    }
    println!(
        "ACCEPTANCE 7 PASS det roots match the rational oracle (-1/2 +- i sqrt(3)/2) to 1e-6"
    );
}

// criterion 8 -----------------------------------------------------------

#[test]
fn acceptance_08_instability_criterion() {
    let tol = ToleranceSet::default();
    let m = instability_family();
    let grid = Grid1D::uniform(1.0, 21.0, 257, 0.0).unwrap();
    let ss = equilibrium::solve_steady(&m, (0.1, 1.5), &grid, &tol).unwrap();
    let w = WeightPair::auto(&m);
    let report = spectral::analyze_stability(&ss, &m, &w, None, None, &tol).unwrap();
    assert!(report.instability_shortcut, "R'(S*) < 0 must fire the shortcut");
    assert!(report.r_prime < 0.0);
    assert_eq!(report.verdict, spectral::Verdict::Unstable);
    // oracle root: lambda^2 + lambda - 1/4 = 0 => (sqrt(2) - 1)/2
    let expect = (2f64.sqrt() - 1.0) / 2.0;
    let root = report.rightmost_real_part.unwrap();
    assert!(
        (root - expect).abs() <= 1e-6,
        "real positive root {root} vs oracle {expect}"
    );
    println!(
        "ACCEPTANCE 8 PASS instability shortcut: R'(S*) = {:.4} < 0, real root {root:.8} matches oracle {expect:.8}",
        report.r_prime
    );
}

// criterion 9 -----------------------------------------------------------

/// Simulate the density-side semigroup in legs, returning the global
/// (t, S(t)) samples at leg boundaries plus all interior nodes.
fn simulate_resource_signal(
    state0: &DensityState,
    legs: usize,
    leg_len: f64,
    m: &ModelIngredients,
    tol: &ToleranceSet,
    disc: &TimeDisc,
) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    let mut state = state0.clone();
    let mut t0 = 0.0;
    for _ in 0..legs {
        let bundle = pde_engine::picard_resource(&state, leg_len, m, tol, disc).unwrap();
        for (i, &t) in bundle.env.t_grid.nodes().iter().enumerate() {
            if i > 0 || out.is_empty() {
                out.push((t0 + t, bundle.env.values[i]));
            }
        }
        state = bundle.n_final;
        t0 += leg_len;
    }
    out
}

/// AR(2) fit of a sampled damped oscillation / growth: least squares for
/// s_{k+1} = alpha s_k + beta s_{k-1}; the dominant rate is
/// log of the larger root magnitude of z^2 - alpha z - beta, divided by dt.
fn fitted_rate(samples: &[(f64, f64)], t_lo: f64, t_hi: f64, stride: usize) -> f64 {
    let pts: Vec<(f64, f64)> = samples
        .iter()
        .copied()
        .filter(|&(t, _)| t >= t_lo && t <= t_hi)
        .step_by(stride)
        .collect();
    assert!(pts.len() > 8, "not enough samples in the fit window");
    let dt = pts[1].0 - pts[0].0;
    let mut a11 = 0.0;
    let mut a12 = 0.0;
    let mut a22 = 0.0;
    let mut r1 = 0.0;
    let mut r2 = 0.0;
    for k in 1..pts.len() - 1 {
        let (s_prev, s_cur, s_next) = (pts[k - 1].1, pts[k].1, pts[k + 1].1);
        a11 += s_cur * s_cur;
        a12 += s_cur * s_prev;
        a22 += s_prev * s_prev;
        r1 += s_next * s_cur;
        r2 += s_next * s_prev;
    }
    let det = a11 * a22 - a12 * a12;
    assert!(det.abs() > 1e-300, "degenerate AR fit");
    let alpha = (r1 * a22 - r2 * a12) / det;
    let beta = (a11 * r2 - a12 * r1) / det;
    // roots of z^2 - alpha z - beta
    let disc = alpha * alpha + 4.0 * beta;
    let mag = if disc >= 0.0 {
        let z1 = 0.5 * (alpha + disc.sqrt());
        let z2 = 0.5 * (alpha - disc.sqrt());
        z1.abs().max(z2.abs())
    } else {
        // complex pair: |z|^2 = -beta
        (-beta).sqrt()
    };
    mag.ln() / dt
}

#[test]
fn acceptance_09_spectrum_vs_simulation() {
    let tol = ToleranceSet::default();

    // stable configuration: rightmost pair at -1/2 +- i sqrt(3)/2
    {
        let m = constant_family();
        let w = WeightPair::auto(&m);
        let (x_grid, _) = matched_grids(&m, &w, 1601, 2);
        let ss = equilibrium::solve_steady(&m, (0.05, 5.0), &x_grid, &tol).unwrap();
        let report = spectral::analyze_stability(&ss, &m, &w, None, None, &tol).unwrap();
        let rightmost = report.rightmost_real_part.unwrap();

        let state = DensityState::new(
            x_grid.clone(),
            ss.n_star.clone(),
            ss.s_star + 0.01,
            w.kappa0,
            0.0,
        )
        .unwrap();
        let disc = TimeDisc::with_dt(1.0 / 512.0);
        let signal: Vec<(f64, f64)> = simulate_resource_signal(&state, 12, 1.0, &m, &tol, &disc)
            .iter()
            .map(|&(t, s)| (t, s - ss.s_star))
            .collect();
        let fit = fitted_rate(&signal, 2.0, 11.0, 64);
        let dx = (x_grid.last() - x_grid.first()) / (x_grid.len() - 1) as f64;
        let allow = (0.05 * rightmost.abs()).max(5.0 * grid_budget(1.0 / 512.0, dx));
        assert!(
            (fit - rightmost).abs() <= allow,
            "stable: fitted rate {fit:.5} vs rightmost {rightmost:.5} (allow {allow:.2e})"
        );
        println!(
            "ACCEPTANCE 9 PASS stable config: fitted decay {fit:.5} vs rightmost root {rightmost:.5} (allow {allow:.3e})"
        );
    }

    // unstable configuration: real root (sqrt(2) - 1)/2
    {
        let m = instability_family();
        let w = WeightPair::auto(&m);
        let (x_grid, _) = matched_grids(&m, &w, 1601, 2);
        let ss = equilibrium::solve_steady(&m, (0.1, 1.5), &x_grid, &tol).unwrap();
        let report = spectral::analyze_stability(&ss, &m, &w, None, None, &tol).unwrap();
        let rightmost = report.rightmost_real_part.unwrap();

        let state = DensityState::new(
            x_grid.clone(),
            ss.n_star.clone(),
            ss.s_star + 1e-4,
            w.kappa0,
            0.0,
        )
        .unwrap();
        let disc = TimeDisc::with_dt(1.0 / 512.0);
        let signal: Vec<(f64, f64)> = simulate_resource_signal(&state, 18, 1.0, &m, &tol, &disc)
            .iter()
            .map(|&(t, s)| (t, s - ss.s_star))
            .collect();
        let fit = fitted_rate(&signal, 6.0, 17.5, 64);
        let dx = (x_grid.last() - x_grid.first()) / (x_grid.len() - 1) as f64;
        let allow = (0.05 * rightmost.abs()).max(5.0 * grid_budget(1.0 / 512.0, dx));
        assert!(
            (fit - rightmost).abs() <= allow,
            "unstable: fitted rate {fit:.5} vs rightmost {rightmost:.5} (allow {allow:.2e})"
        );
        println!(
            "ACCEPTANCE 9 PASS unstable config: fitted growth {fit:.5} vs rightmost root {rightmost:.5} (allow {allow:.3e})"
        );
    }
}

// criterion 10 ----------------------------------------------------------

#[test]
fn acceptance_10_survival_bounds() {
    let m = daphnia_family();
    let (c_lo, c_hi) = m.survival_bounds().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst_margin = f64::INFINITY;
    for _ in 0..200 {
        let amp: f64 = rng.gen();
        let freq = 0.2 + 2.0 * rng.gen::<f64>();
        let base = 0.5 + 2.0 * rng.gen::<f64>();
        let env = EnvironmentTrajectory::from_fn(0.0, 10.0, 257, |t| {
            (base + amp * (freq * t).sin()).abs()
        })
        .unwrap();
        let s = 7.0 * rng.gen::<f64>();
        let t = s + 3.0 * rng.gen::<f64>();
        let f = characteristics::survival(&env, t, s, m.x_b, &m).unwrap();
        let decay = (-m.mu_hat * (t - s)).exp();
        let lo = c_lo * decay * (1.0 - 1e-6);
        let hi = c_hi * decay * (1.0 + 1e-6);
        assert!(f >= lo && f <= hi, "survival {f} outside [{lo}, {hi}]");
        worst_margin = worst_margin.min((f - lo).min(hi - f) / decay);
    }
    println!(
        "ACCEPTANCE 10 PASS survival bounds: 200 draws inside [c, C] e^(-mu_hat dt) with c={c_lo:.4}, C={c_hi:.4} (worst normalised margin {worst_margin:.3e})"
    );
}

// criterion 11 ----------------------------------------------------------

#[test]
fn acceptance_11_birth_time_bounds() {
    // growth dips below g_inf for juveniles, so c1 < x_b and the bounds are
    // two-sided nontrivial: g ramps linearly from g_lo at x_b to g_inf at
    // x_bar and is exactly g_inf beyond
    let mut m = constant_family();
    let (g_lo, g_inf, x_b, x_bar) = (0.4, 1.0, 1.0, 3.0);
    m.g = std::sync::Arc::new(move |x: f64, _| {
        if x >= x_bar {
            g_inf
        } else {
            g_lo + (g_inf - g_lo) * (x - x_b) / (x_bar - x_b)
        }
    });
    m.g_min = g_lo;
    m.g_max = g_inf;
    m.g_inf = g_inf;
    m.x_bar = x_bar;
    m.lipschitz = None;
    m.hypothesis_box = None;
    let c1 = x_bar - (x_bar - x_b) * g_inf / g_lo;
    let c2 = x_bar;
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for k in 0..50 {
        let amp: f64 = rng.gen();
        let freq = 0.3 + rng.gen::<f64>();
        let env = EnvironmentTrajectory::from_fn(-80.0, 0.0, 513, |t| {
            1.0 + amp * (freq * t).sin().abs()
        })
        .unwrap();
        let x = x_bar + 12.0 * rng.gen::<f64>();
        let t = characteristics::birth_time(&env, x, 0.0, &m).unwrap();
        let lo = (c1 - x) / g_inf - 1e-9;
        let hi = (c2 - x) / g_inf + 1e-9;
        assert!(
            t >= lo && t <= hi,
            "draw {k}: T = {t} outside [(c1-x)/g_inf, (c2-x)/g_inf] = [{lo}, {hi}]"
        );
    }
    println!(
        "ACCEPTANCE 11 PASS birth-time bounds: 50 draws inside [(c1-x)/g_inf, (c2-x)/g_inf] with c1={c1}, c2={c2}"
    );
}
