//! Command-line front end. Exit codes: 0 when every verdict passes, 2 when
//! some verdict fails, 1 on any error.

use super::config::{ExperimentConfig, ExperimentKind, Overrides};
use super::experiments::{run, RunOptions};
use super::persist::persist;
use crate::error::{Error, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use std::path::PathBuf;

pub const EXIT_PASS: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_FAIL: i32 = 2;

#[derive(Parser, Debug)]
#[command(name = "fuchswave", version, about = "Experiments for the damped Klein-Gordon equation with scale-invariant dissipation and mass")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Evolve initial data and record the energy trace (needs --config).
    Simulate(Common),
    /// Characteristic roots and regime of (b0, m0).
    Classify(Common),
    /// Fitted against predicted exponents for a list of (b0, m0, sigma) cells.
    Sweep(Common),
    /// Residuals of the modified scattering comparison (needs --config).
    Scatter(Common),
    /// Decay of generic data against data satisfying the moment conditions.
    Moments(Common),
    /// Levinson solutions of the low-frequency Fuchs system.
    Levinson(Common),
    /// One Hartman-Wintner step on the zero-frequency Fuchs system.
    Hw(Common),
    /// Diagonalized representation against the oracle at random points.
    Repcheck(Common),
}

#[derive(Args, Debug, Clone)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, allow_hyphen_values = true)]
    b0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    m0: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    /// Zone constant.
    #[arg(long = "N")]
    n: Option<f64>,
    #[arg(long)]
    tfinal: Option<f64>,
    /// Output directory for the manifest and CSV traces.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Oracle tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Treat grid-resolution warnings as errors.
    #[arg(long)]
    strict: bool,
    #[arg(long, env = "FUCHSWAVE_THREADS")]
    threads: Option<usize>,
}

impl Command {
    fn parts(&self) -> (ExperimentKind, &Common, &'static str) {
        match self {
            Command::Simulate(c) => (ExperimentKind::Simulate, c, "simulate"),
            Command::Classify(c) => (ExperimentKind::Classify, c, "classify"),
            Command::Sweep(c) => (ExperimentKind::TableSweep, c, "sweep"),
            Command::Scatter(c) => (ExperimentKind::Scattering, c, "scatter"),
            Command::Moments(c) => (ExperimentKind::Moments, c, "moments"),
            Command::Levinson(c) => (ExperimentKind::LevinsonDemo, c, "levinson"),
            Command::Hw(c) => (ExperimentKind::HwDemo, c, "hw"),
            Command::Repcheck(c) => (ExperimentKind::RepresentationCheck, c, "repcheck"),
        }
    }
}

fn usage(sub: &str) -> String {
    let mut cmd = Cli::command();
    match cmd.find_subcommand_mut(sub) {
        Some(s) => s.render_usage().to_string(),
        None => cmd.render_usage().to_string(),
    }
}

/// Parses `argv` (including the program name), runs the experiment and returns the exit code.
pub fn run_cli<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { EXIT_PASS };
            let _ = e.print();
            return code;
        }
    };
    let (kind, common, sub) = cli.command.parts();
    match execute(kind, common, sub) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config(_)) {
                eprintln!("{}", usage(sub));
            }
            EXIT_ERROR
        }
    }
}

fn execute(kind: ExperimentKind, common: &Common, sub: &str) -> Result<i32> {
    if let Some(n) = common.threads {
        // a pool already installed by an earlier call in the same process is kept
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let needs_config = matches!(kind, ExperimentKind::Simulate | ExperimentKind::Scattering);
    let mut config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None if needs_config => return Err(Error::Config(format!("'{sub}' needs --config FILE"))),
        None => {
            let mut c = ExperimentConfig::new(kind);
            c.experiment = None;
            c
        }
    };
    config.apply(&Overrides { b0: common.b0, m0: common.m0, sigma: common.sigma, n: common.n, t_final: common.tfinal, tol: common.tol })?;
    let label = common.config.as_ref().and_then(|p| p.file_stem()).map(|s| s.to_string_lossy().into_owned());
    let (record, attachments) = run(&config, kind, &RunOptions { strict: common.strict, label })?;

    if kind == ExperimentKind::Classify {
        let s = &record.summary;
        let fmt = |v: &serde_json::Value| {
            let (re, im) = (v[0].as_f64().unwrap_or(f64::NAN), v[1].as_f64().unwrap_or(f64::NAN));
            if im == 0.0 {
                format!("{re}")
            } else {
                format!("{re}{:+}i", im)
            }
        };
        println!("b0 = {}, m0 = {}", s["b0"], s["m0"]);
        println!("μ₊ = {}, μ₋ = {}", fmt(&s["mu_plus"]), fmt(&s["mu_minus"]));
        println!("regime {}", s["regime"].as_str().unwrap_or(""));
        println!("dominant exponent {}", s["dominant_exponent"]);
    }
    for w in &record.warnings {
        eprintln!("warning: {w}");
    }
    for v in &record.verdicts {
        println!("{}", v.line());
    }
    let out_dir = common.out.clone().or_else(|| (kind == ExperimentKind::TableSweep).then(|| PathBuf::from(".")));
    if let Some(dir) = out_dir {
        for p in attachments.write(&dir)? {
            println!("wrote {}", p.display());
        }
        if common.out.is_some() {
            println!("wrote {}", persist(&record, &dir)?.display());
        }
    }
    Ok(if record.passed() { EXIT_PASS } else { EXIT_FAIL })
}
