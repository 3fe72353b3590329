//! Acceptance suite: one PASS/FAIL line per criterion, with its runtime budget.
//!
//! Run a subset by passing criterion numbers: `cargo test --test acceptance -- 4 9`.

use fuchswave::asymptotic::{hartman_wintner, levinson_solve, FuchsSystem, HWOptions, LevinsonOptions};
use fuchswave::coeffs::{CoefficientModel, RegimeCase};
use fuchswave::diagonalize::{representation_check, RepresentationOptions};
use fuchswave::estimates::{fit_power_law, improved_u_bound, log_times, moment_experiment, scattering_residual, sharpness_limit, DataProfile, RadialGrid};
use fuchswave::linalg::op_norm;
use fuchswave::modal::{ModalSystem, SystemForm};
use fuchswave::zones::ZoneConfig;
use std::time::Instant;

type Check = fn() -> Result<(bool, String), String>;

const CELLS: [(f64, f64); 8] = [(1.0, 1.0), (1.0, 0.01), (2.0, 0.75), (2.0, 2.0), (3.0, 0.0), (4.0, 0.0), (2.0, 0.25), (0.0, 5.0)];
const RATE_TOL: f64 = 0.05;

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn regime_classifier() -> Result<(bool, String), String> {
    // roots of μ² + (b₀+1)μ + (b₀+m₀) by hand
    let s2 = std::f64::consts::FRAC_1_SQRT_2;
    let expected: [((f64, f64), (f64, f64), RegimeCase); 8] = [
        ((-1.0, 1.0), (-1.0, -1.0), RegimeCase::ComplexPair),
        ((-1.0, 0.1), (-1.0, -0.1), RegimeCase::ComplexPair),
        ((-1.5, s2), (-1.5, -s2), RegimeCase::ComplexPair),
        ((-1.5, 7f64.sqrt() / 2.0), (-1.5, -(7f64.sqrt()) / 2.0), RegimeCase::ComplexPair),
        ((-1.0, 0.0), (-3.0, 0.0), RegimeCase::RealLargeMuplus),
        ((-1.0, 0.0), (-4.0, 0.0), RegimeCase::RealLargeMuplus),
        ((-1.5, 0.0), (-1.5, 0.0), RegimeCase::DoubleRoot),
        ((-0.5, 19f64.sqrt() / 2.0), (-0.5, -(19f64.sqrt()) / 2.0), RegimeCase::ComplexPair),
    ];
    let mut worst: f64 = 0.0;
    let mut mismatched = Vec::new();
    for (&(b0, m0), (plus, minus, case)) in CELLS.iter().zip(expected) {
        let c = fuchswave::coeffs::classify_regime(b0, m0);
        let d = (c.mu_plus.re - plus.0).abs().max((c.mu_plus.im - plus.1).abs()).max((c.mu_minus.re - minus.0).abs()).max((c.mu_minus.im - minus.1).abs());
        worst = worst.max(d);
        if c.case != case || d > 1e-12 {
            mismatched.push(format!("({b0},{m0})"));
        }
    }
    Ok((mismatched.is_empty(), format!("8 cells, worst root error {worst:.1e}, mismatches {mismatched:?}")))
}

fn dissipative_rate() -> Result<(bool, String), String> {
    let zone = ZoneConfig::default();
    let mut failures = Vec::new();
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for &(b0, m0) in &CELLS {
        let model = CoefficientModel::pure(b0, m0);
        let cls = model.classify_regime();
        if !cls.distinct_roots {
            continue;
        }
        for xi in [1e-3, 1e-4] {
            let theta = zone.theta(xi);
            let times = log_times(1e2, theta, 41);
            let p = ModalSystem::new(model.clone(), zone, xi, SystemForm::Dissipative).propagate(0.0, &times, 1e-10).map_err(err)?;
            let norms: Vec<f64> = p.matrices.iter().map(op_norm).collect();
            let fit = fit_power_law(&times, &norms, (1e2, theta)).map_err(err)?;
            let dev = (fit.exponent - cls.mu_plus.re).abs();
            worst = worst.max(dev);
            checked += 1;
            if dev > RATE_TOL {
                failures.push(format!("({b0},{m0}) xi={xi:e}: {:.3} vs {:.3}", fit.exponent, cls.mu_plus.re));
            }
        }
    }
    Ok((failures.is_empty(), format!("{checked} fits, worst deviation {worst:.3}; outside tolerance: {failures:?}")))
}

fn hyperbolic_rate() -> Result<(bool, String), String> {
    let zone = ZoneConfig::default();
    let times = log_times(1e2, 1e4, 41);
    let mut worst: f64 = 0.0;
    let mut failures = Vec::new();
    for &(b0, m0) in &CELLS {
        let model = CoefficientModel::pure(b0, m0);
        for xi in [2.0 * zone.n, 8.0 * zone.n] {
            let p = ModalSystem::new(model.clone(), zone, xi, SystemForm::Hyperbolic).propagate(0.0, &times, 1e-10).map_err(err)?;
            let norms: Vec<f64> = p.matrices.iter().map(op_norm).collect();
            let fit = fit_power_law(&times, &norms, (1e2, 1e4)).map_err(err)?;
            let dev = (fit.exponent + b0 / 2.0).abs();
            worst = worst.max(dev);
            if dev > RATE_TOL {
                failures.push(format!("({b0},{m0}) xi={xi}"));
            }
        }
    }
    Ok((failures.is_empty(), format!("16 fits, worst deviation {worst:.4}; outside tolerance: {failures:?}")))
}

fn representation() -> Result<fuchswave::diagonalize::RepresentationCheck, String> {
    representation_check(&CoefficientModel::example_bounded(), 2, ZoneConfig::default(), 20, 1, RepresentationOptions::default()).map_err(err)
}

fn representation_identity() -> Result<(bool, String), String> {
    let r = representation()?;
    Ok((r.max_error <= 1e-6, format!("k = 2, N = {:.3}, max relative error {:.2e} over {} points", r.zone.n, r.max_error, r.samples.len())))
}

fn determinant_bound() -> Result<(bool, String), String> {
    let r = representation()?;
    let slack = r.samples.iter().map(|p| p.det_q / p.det_bound).fold(f64::INFINITY, f64::min);
    Ok((r.det_ok && r.max_unitarity <= 1e-12, format!("min |det Q|/exp(-2C) = {slack:.4}, unitarity defect {:.1e}", r.max_unitarity)))
}

fn levinson() -> Result<(bool, String), String> {
    let zone = ZoneConfig::new(0.1);
    let xi = 1e-4;
    let sys = ModalSystem::new(CoefficientModel::pure(3.0, 0.0), zone, xi, SystemForm::Fuchs);
    let fuchs = FuchsSystem::from_modal(&sys).map_err(err)?;
    let theta = zone.theta(xi);
    let mut ok = true;
    let mut parts = Vec::new();
    for (k, label) in [(0, "-"), (1, "+")] {
        let sol = levinson_solve(&fuchs.system, k, 1.0, 2.0 * (1.0 + theta), LevinsonOptions::default()).map_err(err)?;
        let res = sol.residual(1.0 + theta / 2.0);
        ok &= res <= 0.01 && sol.observed_rate() <= sol.contraction_bound;
        parts.push(format!("V{label}: residual {res:.2e}, rate {:.1e} <= {:.1e}", sol.observed_rate(), sol.contraction_bound));
    }
    Ok((ok, format!("(3,0), N = 0.1, xi = 1e-4; {}", parts.join("; "))))
}

fn hartman_wintner_step() -> Result<(bool, String), String> {
    let model = CoefficientModel::log_perturbation(3.0, 0.5, 0.01, 0.01, 1.0).with_sigma(1.5);
    let sys = ModalSystem::new(model, ZoneConfig::default(), 0.0, SystemForm::Fuchs);
    let fuchs = FuchsSystem::from_modal(&sys).map_err(err)?;
    let (hw, _) = hartman_wintner(&fuchs.system, 1.5, 1.0, 1e8, HWOptions::default()).map_err(err)?;
    let diag_zero = hw.norm_trace.iter().all(|&(tau, _)| {
        let n = hw.n_at(tau);
        n[(0, 0)].norm() == 0.0 && n[(1, 1)].norm() == 0.0
    });
    let tail: Vec<f64> = hw.norm_trace.iter().filter(|p| p.0 >= 1e2).map(|p| p.1).collect();
    let decreasing = tail.windows(2).all(|w| w[1] <= w[0]);
    let ratio = hw.remainder_integral(1e2, 1e4, 1.0) / fuchs.system.remainder_integral(1e2, 1e4, 1.5);
    Ok((diag_zero && decreasing && ratio <= 0.1, format!("diag(N) = 0: {diag_zero}, |N| decreasing: {decreasing}, tail ratio {ratio:.4}")))
}

fn energy_sharpness() -> Result<(bool, String), String> {
    let grid = RadialGrid::standard(3).map_err(err)?;
    let r = sharpness_limit(&CoefficientModel::example_bounded(), ZoneConfig::default(), &DataProfile::ring(2.5, 1.0), &grid, 1e4, 1e-10).map_err(err)?;
    Ok((r.pass, format!("variation {:.2e} over [1e3, 1e4], limit {:.4}", r.variation, r.limit)))
}

fn moment_improvement() -> Result<(bool, String), String> {
    let m = moment_experiment(&CoefficientModel::pure(4.0, 0.0), ZoneConfig::default(), 1, 0.1, 1e-10).map_err(err)?;
    Ok((m.pass, format!("generic {:.4} (want -1), moment [kappa'] = {}: {:.4} (want -2)", m.generic.exponent, m.data.kappa_prime, m.moment.exponent)))
}

fn modified_scattering() -> Result<(bool, String), String> {
    let grid = RadialGrid::standard(3).map_err(err)?;
    let data = DataProfile::ring(0.6, 0.5);
    let r = scattering_residual(&CoefficientModel::example_bounded(), &data, &grid, 1e4, 1e-3).map_err(err)?;
    let free = scattering_residual(&CoefficientModel::pure(0.0, 0.0), &data, &grid, 1e4, 1e-3).map_err(err)?;
    let free_zero = free.residual_dt.iter().chain(&free.residual_grad).all(|&v| v == 0.0);
    Ok((
        r.pass && free_zero,
        format!(
            "u_t residual {:.2e} -> {:.2e}, grad residual {:.2e} -> {:.2e}; free case identically zero: {free_zero}",
            r.residual_dt[0],
            r.residual_dt.last().unwrap(),
            r.residual_grad[0],
            r.residual_grad.last().unwrap()
        ),
    ))
}

fn improved_bound() -> Result<(bool, String), String> {
    let grid = RadialGrid::standard(1).map_err(err)?;
    let f = improved_u_bound(&CoefficientModel::pure(2.0, 2.0), ZoneConfig::default(), &DataProfile::low_band(2.0), &grid, 1e-10).map_err(err)?;
    Ok((f.exponent <= -0.45, format!("fitted |u| exponent {:.4} (bound -0.45)", f.exponent)))
}

fn end_to_end_sweep() -> Result<(bool, String), String> {
    let dir = tempfile::tempdir().map_err(err)?;
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/configs/rate_table.json");
    let out = std::process::Command::new(env!("CARGO_BIN_EXE_fuchswave")).args(["sweep", "--config", config]).current_dir(dir.path()).output().map_err(err)?;
    let stdout = String::from_utf8_lossy(&out.stdout);
    let verdicts: Vec<&str> = stdout.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).collect();
    let all_pass = verdicts.len() == 4 && verdicts.iter().all(|l| l.starts_with("PASS"));
    let csv_ok = dir.path().join("rate_table_results.csv").exists();
    let code = out.status.code();
    Ok((code == Some(0) && all_pass && csv_ok, format!("exit {code:?}, {} verdict lines all pass: {all_pass}, rate_table_results.csv written: {csv_ok}", verdicts.len())))
}

fn main() {
    let criteria: [(usize, &str, f64, Check); 12] = [
        (1, "regime classifier", 1.0, regime_classifier),
        (2, "dissipative-zone rate", 120.0, dissipative_rate),
        (3, "hyperbolic-zone rate", 120.0, hyperbolic_rate),
        (4, "representation identity", 60.0, representation_identity),
        (5, "determinant bound", 60.0, determinant_bound),
        (6, "Levinson solver", 30.0, levinson),
        (7, "Hartman-Wintner step", 60.0, hartman_wintner_step),
        (8, "energy estimate and sharpness", 120.0, energy_sharpness),
        (9, "moment improvement", 120.0, moment_improvement),
        (10, "modified scattering", 120.0, modified_scattering),
        (11, "improved u bound", 60.0, improved_bound),
        (12, "end-to-end sweep", 900.0, end_to_end_sweep),
    ];
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let suite = Instant::now();
    let mut failed = Vec::new();
    for (id, name, budget, check) in criteria {
        if !selected.is_empty() && !selected.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let (pass, detail) = match std::panic::catch_unwind(check) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        let secs = start.elapsed().as_secs_f64();
        let pass = pass && secs < budget;
        println!("criterion {id:>2} {} {name}: {detail} [{secs:.1}s, budget {budget:.0}s]", if pass { "PASS" } else { "FAIL" });
        if !pass {
            failed.push(id);
        }
    }
    println!("acceptance: {} failing {:?}, wall time {:.1}s", if failed.is_empty() { "all pass," } else { "" }, failed, suite.elapsed().as_secs_f64());
    if !failed.is_empty() {
        std::process::exit(1);
    }
}
