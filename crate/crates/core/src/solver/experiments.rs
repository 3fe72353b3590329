//! One runner per experiment kind, each producing a [`ResultRecord`].

use super::config::{ExperimentConfig, ExperimentKind, SweepCell};
use super::persist::{sha256_hex, ResultRecord, Trace, Verdict};
use super::spectral::simulate_box;
use crate::asymptotic::{hartman_wintner, levinson_solve, FuchsSystem, HWOptions, LevinsonOptions};
use crate::coeffs::CoefficientModel;
use crate::diagonalize::{representation_check, RepresentationOptions};
use crate::error::{Error, Result};
use crate::estimates::{energy_trace, fit_power_law, moment_experiment, scattering_residual, table_row, TableRow};
use crate::modal::{ModalSystem, SystemForm};
use crate::zones::ZoneConfig;
use serde_json::json;
use std::time::Instant;

#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    /// Turn resolution warnings into errors.
    pub strict: bool,
    /// Prefix of the sweep results file, `<label>_results.csv`.
    pub label: Option<String>,
}

/// Files written next to the manifest under fixed names.
#[derive(Clone, Debug, Default)]
pub struct Attachments(pub Vec<(String, Vec<u8>)>);

struct Outcome {
    traces: Vec<Trace>,
    verdicts: Vec<Verdict>,
    summary: serde_json::Value,
    warnings: Vec<String>,
    attachments: Attachments,
}

impl Outcome {
    fn new(summary: serde_json::Value) -> Self {
        Outcome { traces: Vec::new(), verdicts: Vec::new(), summary, warnings: Vec::new(), attachments: Attachments::default() }
    }
}

/// Runs `kind` on `config`. A config naming a different experiment is rejected.
pub fn run(config: &ExperimentConfig, kind: ExperimentKind, opts: &RunOptions) -> Result<(ResultRecord, Attachments)> {
    if let Some(k) = config.experiment {
        if k != kind {
            return Err(Error::Config(format!("the config is for experiment '{}', not '{}'", k.as_str(), kind.as_str())));
        }
    }
    config.validate()?;
    let start = Instant::now();
    let out = match kind {
        ExperimentKind::Simulate => simulate(config, opts)?,
        ExperimentKind::Classify => classify(config)?,
        ExperimentKind::TableSweep => table_sweep(config, opts)?,
        ExperimentKind::Scattering => scattering(config)?,
        ExperimentKind::Moments => moments(config)?,
        ExperimentKind::LevinsonDemo => levinson_demo(config)?,
        ExperimentKind::HwDemo => hw_demo(config)?,
        ExperimentKind::RepresentationCheck => representation(config)?,
    };
    let mut stamped = config.clone();
    stamped.experiment = Some(kind);
    let canonical = stamped.canonical_json();
    let record = ResultRecord {
        experiment: kind.as_str().to_string(),
        config: serde_json::from_str(&canonical)?,
        config_hash: sha256_hex(canonical.as_bytes()),
        traces: out.traces,
        verdicts: out.verdicts,
        summary: out.summary,
        warnings: out.warnings,
        wall_time: start.elapsed().as_secs_f64(),
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
    };
    Ok((record, out.attachments))
}

fn classify(config: &ExperimentConfig) -> Result<Outcome> {
    let model = config.model()?;
    let cls = model.classify_regime();
    let mut out = Outcome::new(json!({
        "b0": cls.b0,
        "m0": cls.m0,
        "mu_plus": [cls.mu_plus.re, cls.mu_plus.im],
        "mu_minus": [cls.mu_minus.re, cls.mu_minus.im],
        "regime": cls.case.as_str(),
        "dominant_exponent": cls.dominant_exponent,
        "distinct_roots": cls.distinct_roots,
        "hyperbolic_dominates": cls.hyperbolic_dominates,
    }));
    let sum = cls.mu_plus + cls.mu_minus;
    let prod = cls.mu_plus * cls.mu_minus;
    let err = (sum.re + model.b0 + 1.0).abs().max(sum.im.abs()).max((prod.re - model.b0 - model.m0).abs()).max(prod.im.abs());
    out.verdicts.push(Verdict::new("vieta", err <= 1e-12 * (1.0 + model.b0.abs() + model.m0.abs()), format!("root identities hold to {err:.1e}")));
    Ok(out)
}

fn simulate(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let model = config.model()?;
    let data = config.data()?;
    let times = config.times.checkpoints();
    let tol = config.tolerances.ode;
    let mut out = Outcome::new(json!({}));
    let cols = ["t", "energy", "u_over_1pt", "grad_u", "u_t", "u"];
    let mut summary = serde_json::Map::new();
    let radial = match (&config.grid, &config.radial) {
        (Some(_), None) => None,
        (_, r) => Some(config.radial_grid(r.map(|r| r.dim).unwrap_or(1))?),
    };
    let radial_trace = match &radial {
        Some(g) => {
            let tr = energy_trace(&model, config.zone, &data, g, &times, tol)?;
            out.traces.push(Trace::from_columns(
                "radial",
                &[(cols[0], &tr.times), (cols[1], &tr.values), (cols[2], &tr.components[0]), (cols[3], &tr.components[1]), (cols[4], &tr.components[2]), (cols[5], &tr.u_norm)],
            ));
            Some(tr)
        }
        None => None,
    };
    if let Some(grid) = &config.grid {
        let tr = simulate_box(&model, config.zone, &data, grid, &times, tol, opts.strict)?;
        out.traces.push(Trace::from_columns(
            "box",
            &[(cols[0], &tr.times), (cols[1], &tr.values), (cols[2], &tr.components[0]), (cols[3], &tr.components[1]), (cols[4], &tr.components[2]), (cols[5], &tr.u_norm)],
        ));
        out.verdicts.push(Verdict::new("fft_roundtrip", tr.roundtrip_error <= 1e-12, format!("relative error {:.1e}", tr.roundtrip_error)));
        summary.insert("active_shells".into(), json!(tr.active_shells));
        summary.insert("roundtrip_error".into(), json!(tr.roundtrip_error));
        out.warnings.extend(tr.warnings.iter().cloned());
        if let (Some(rt), Some(rg)) = (&radial_trace, &radial) {
            if rg.dim == grid.dim {
                let worst = rt
                    .values
                    .iter()
                    .zip(&tr.values)
                    .filter(|(a, _)| **a > 0.0)
                    .map(|(a, b)| (a - b).abs() / a)
                    .fold(0.0, f64::max);
                out.verdicts.push(Verdict::new("plancherel", worst <= 5e-3, format!("box and radial energies differ by at most {:.2}%", 100.0 * worst)));
            }
        }
    }
    let values = out.traces.last().map(|t| t.rows.iter().map(|r| r[1]).collect::<Vec<_>>()).unwrap_or_default();
    let all_finite = values.iter().all(|v| v.is_finite());
    out.verdicts.push(Verdict::new("finite", all_finite, format!("{} checkpoints", values.len())));
    let w = config.times.fit_window;
    if config.times.t_final >= w.1 * (1.0 - 1e-12) && values.iter().all(|&v| v > 0.0) {
        if let Ok(fit) = fit_power_law(&times, &values, w) {
            summary.insert("energy_fit".into(), serde_json::to_value(&fit)?);
        }
    }
    let cls = model.classify_regime();
    summary.insert("dominant_exponent".into(), json!(cls.dominant_exponent));
    out.summary = serde_json::Value::Object(summary);
    Ok(out)
}

fn sweep_cells(config: &ExperimentConfig) -> Result<Vec<SweepCell>> {
    if !config.sweep.cells.is_empty() || config.model.is_none() {
        return Ok(config.sweep.cells.clone());
    }
    let m = config.model()?;
    Ok(vec![SweepCell { b0: m.b0, m0: m.m0, sigma: m.sigma }])
}

fn table_csv(rows: &[TableRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["b0", "m0", "sigma", "regime", "applicable", "xi_low", "xi_high", "predicted_low", "fitted_low", "predicted_high", "fitted_high", "log_corrected", "verdict", "note"])?;
    let opt = |v: Option<f64>| v.map(|x| format!("{x}")).unwrap_or_default();
    for r in rows {
        w.write_record([
            format!("{}", r.b0),
            format!("{}", r.m0),
            format!("{}", r.sigma),
            r.regime.clone(),
            r.applicable.to_string(),
            format!("{:e}", r.xi_low),
            format!("{}", r.xi_high),
            opt(r.predicted_low),
            opt(r.fitted_low),
            opt(r.predicted_high),
            opt(r.fitted_high),
            r.log_corrected.to_string(),
            if r.pass { "pass" } else { "fail" }.to_string(),
            r.note.clone(),
        ])?;
    }
    Ok(w.into_inner().map_err(|e| e.into_error())?)
}

/// Per-cell failures are recorded as failing verdicts; the sweep continues.
fn table_sweep(config: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome> {
    let cells = sweep_cells(config)?;
    let xi_high = config.sweep.xi_high.unwrap_or(2.0 * config.zone.n);
    let mut out = Outcome::new(json!({}));
    let mut rows = Vec::new();
    let mut trace = Trace::new("table", &["b0", "m0", "sigma", "predicted_low", "fitted_low", "predicted_high", "fitted_high", "pass"]);
    let nan = |v: Option<f64>| v.unwrap_or(f64::NAN);
    for cell in &cells {
        let name = format!("cell(b0={}, m0={}, sigma={})", cell.b0, cell.m0, cell.sigma);
        let model = CoefficientModel::pure(cell.b0, cell.m0).with_sigma(cell.sigma);
        match model.validate().and_then(|_| table_row(&model, config.zone, config.sweep.xi_low, xi_high, config.tolerances.ode)) {
            Ok(row) => {
                let detail = if row.applicable {
                    format!(
                        "{}; low {:.3} vs {:.3}, high {:.3} vs {:.3}",
                        row.regime,
                        nan(row.fitted_low),
                        nan(row.predicted_low),
                        nan(row.fitted_high),
                        nan(row.predicted_high)
                    )
                } else {
                    format!("{}; not applicable: {}", row.regime, row.note)
                };
                out.verdicts.push(Verdict::new(name, row.pass, detail));
                trace.push(vec![row.b0, row.m0, row.sigma, nan(row.predicted_low), nan(row.fitted_low), nan(row.predicted_high), nan(row.fitted_high), if row.pass { 1.0 } else { 0.0 }]);
                rows.push(row);
            }
            Err(e) => out.verdicts.push(Verdict::new(name, false, format!("error: {e}"))),
        }
    }
    out.traces.push(trace);
    out.summary = json!({ "rows": rows, "xi_low": config.sweep.xi_low, "xi_high": xi_high });
    let label = opts.label.clone().unwrap_or_else(|| "sweep".to_string());
    out.attachments.0.push((format!("{label}_results.csv"), table_csv(&rows)?));
    Ok(out)
}

fn scattering(config: &ExperimentConfig) -> Result<Outcome> {
    let model = config.model()?;
    let data = config.data()?;
    let grid = config.radial_grid(3)?;
    let r = scattering_residual(&model, &data, &grid, config.times.t_final, config.tolerances.scattering)?;
    let mut out = Outcome::new(json!({ "w_norms": r.w_norms }));
    out.traces.push(Trace::from_columns("residuals", &[("t", &r.times), ("residual_dt", &r.residual_dt), ("residual_grad", &r.residual_grad)]));
    let (first, last) = (r.residual_dt[0], *r.residual_dt.last().unwrap());
    out.verdicts.push(Verdict::new("scattering", r.pass, format!("|lambda u_t - v_t| from {first:.3e} to {last:.3e}; |lambda grad u - grad v| from {:.3e} to {:.3e}", r.residual_grad[0], r.residual_grad.last().unwrap())));
    Ok(out)
}

fn moments(config: &ExperimentConfig) -> Result<Outcome> {
    let model = config.model()?;
    let m = moment_experiment(&model, config.zone, config.moments.dim, config.moments.slack, config.tolerances.ode)?;
    let mut out = Outcome::new(serde_json::to_value(&m)?);
    let line = |f: &crate::estimates::DecayFit| format!("fitted {:.4} vs predicted {:.4} (tolerance {})", f.exponent, f.predicted.unwrap_or(f64::NAN), f.tolerance);
    out.verdicts.push(Verdict::new("generic_data", m.generic.passed(), line(&m.generic)));
    out.verdicts.push(Verdict::new(format!("moment_data([kappa']={})", m.data.kappa_prime), m.moment.passed(), line(&m.moment)));
    Ok(out)
}

/// Both Levinson solutions of the Fuchs form at `levinson.xi`, integrated past
/// the zone boundary (where the remainder is cut to zero).
fn levinson_demo(config: &ExperimentConfig) -> Result<Outcome> {
    let model = config.model()?;
    let spec = config.levinson;
    let sys = ModalSystem::new(model, config.zone, spec.xi, SystemForm::Fuchs);
    let fuchs = FuchsSystem::from_modal(&sys)?;
    let theta = config.zone.theta(spec.xi);
    let horizon = 2.0 * (1.0 + theta);
    let probe = 1.0 + theta / 2.0;
    let mut out = Outcome::new(json!({ "theta": theta, "probe_tau": probe }));
    let mut details = Vec::new();
    for (k, label) in [(0usize, "minus"), (1, "plus")] {
        let sol = levinson_solve(&fuchs.system, k, spec.tau0, horizon, LevinsonOptions::default())?;
        let res = sol.residual(probe);
        out.verdicts.push(Verdict::new(format!("residual_{label}"), res <= spec.max_residual, format!("|V t^-mu - e| = {res:.3e} at t = theta/2 (bound {})", spec.max_residual)));
        out.verdicts.push(Verdict::new(
            format!("picard_rate_{label}"),
            sol.observed_rate() <= sol.contraction_bound,
            format!("observed {:.3e} <= bound {:.3e} after {} iterations", sol.observed_rate(), sol.contraction_bound, sol.iterations),
        ));
        let (taus, vals): (Vec<f64>, Vec<f64>) = sol.residual_trace.iter().copied().unzip();
        out.traces.push(Trace::from_columns(format!("residual_{label}"), &[("tau", &taus), ("residual", &vals)]));
        details.push(json!({ "k": k, "residual": res, "rate": sol.observed_rate(), "bound": sol.contraction_bound, "ode_residual": sol.ode_residual(&fuchs.system) }));
    }
    out.summary["solutions"] = json!(details);
    out.summary["mu"] = json!([[fuchs.mu_minus.re, fuchs.mu_minus.im], [fuchs.mu_plus.re, fuchs.mu_plus.im]]);
    Ok(out)
}

/// One Hartman–Wintner step on the `ξ = 0` Fuchs form.
fn hw_demo(config: &ExperimentConfig) -> Result<Outcome> {
    let model = config.model()?;
    let spec = config.hw;
    let sys = ModalSystem::new(model, ZoneConfig::default(), 0.0, SystemForm::Fuchs);
    let fuchs = FuchsSystem::from_modal(&sys)?;
    let (hw, _) = hartman_wintner(&fuchs.system, spec.sigma, 1.0, spec.horizon, HWOptions::default())?;
    let mut out = Outcome::new(json!({}));
    let diag_zero = hw.norm_trace.iter().all(|&(tau, _)| {
        let n = hw.n_at(tau);
        (0..n.nrows()).all(|j| n[(j, j)] == crate::linalg::c(0.0))
    });
    out.verdicts.push(Verdict::new("diag_n_zero", diag_zero, "diagonal of N vanishes at every panel break"));
    let tail: Vec<f64> = hw.norm_trace.iter().filter(|p| p.0 >= spec.window.0).map(|p| p.1).collect();
    let monotone = tail.windows(2).all(|w| w[1] <= w[0]);
    out.verdicts.push(Verdict::new("n_decreasing", monotone, format!("|N| from {:.3e} to {:.3e} beyond t = {:.0e}", tail.first().unwrap_or(&f64::NAN), tail.last().unwrap_or(&f64::NAN), spec.window.0)));
    let (a, b) = spec.window;
    let transformed = hw.remainder_integral(a, b, 1.0);
    let proxy = fuchs.system.remainder_integral(a, b, spec.sigma);
    let ratio = transformed / proxy;
    out.verdicts.push(Verdict::new("remainder_reduction", ratio <= spec.max_ratio, format!("L1 tail {transformed:.3e} is {ratio:.4} of the L^sigma proxy {proxy:.3e} (bound {})", spec.max_ratio)));
    let (taus, norms): (Vec<f64>, Vec<f64>) = hw.norm_trace.iter().copied().unzip();
    out.traces.push(Trace::from_columns("n_norm", &[("tau", &taus), ("norm_n", &norms)]));
    out.summary = json!({
        "valid_from": hw.valid_from,
        "truncation_bound": hw.truncation_bound,
        "transformed_tail": transformed,
        "sigma_proxy": proxy,
        "ratio": ratio,
    });
    Ok(out)
}

fn representation(config: &ExperimentConfig) -> Result<Outcome> {
    let model = config.model()?;
    let spec = config.representation;
    let check = representation_check(&model, spec.k, config.zone, spec.points, spec.seed, RepresentationOptions::default())?;
    let mut out = Outcome::new(json!({ "zone_n": check.zone.n, "k": check.k }));
    out.verdicts.push(Verdict::new("representation", check.max_error <= spec.max_error, format!("max relative error {:.3e} over {} points (bound {:.0e})", check.max_error, check.samples.len(), spec.max_error)));
    out.verdicts.push(Verdict::new("det_q_bound", check.det_ok, "|det Q_k| >= exp(-2 C_total) at every point"));
    out.verdicts.push(Verdict::new("free_unitarity", check.max_unitarity <= 1e-12, format!("|E0 E0* - I| <= {:.1e}", check.max_unitarity)));
    let col = |f: fn(&crate::diagonalize::RepresentationSample) -> f64| check.samples.iter().map(f).collect::<Vec<f64>>();
    let (s, t, xi, err, det, bound) = (col(|p| p.s), col(|p| p.t), col(|p| p.xi), col(|p| p.relative_error), col(|p| p.det_q), col(|p| p.det_bound));
    out.traces.push(Trace::from_columns("samples", &[("s", &s), ("t", &t), ("xi", &xi), ("relative_error", &err), ("det_q", &det), ("det_bound", &bound)]));
    Ok(out)
}

impl Attachments {
    pub fn write(&self, dir: &std::path::Path) -> Result<Vec<std::path::PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut paths = Vec::with_capacity(self.0.len());
        for (name, bytes) in &self.0 {
            let p = dir.join(name);
            std::fs::write(&p, bytes)?;
            paths.push(p);
        }
        Ok(paths)
    }
}
