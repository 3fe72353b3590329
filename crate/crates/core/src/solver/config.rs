//! Experiment configuration: a single versioned JSON document.

use crate::coeffs::{CoefficientModel, ModelSpec};
use crate::error::{Error, Result};
use crate::estimates::{DataProfile, RadialGrid};
use crate::zones::ZoneConfig;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Simulate,
    Classify,
    TableSweep,
    Scattering,
    Moments,
    LevinsonDemo,
    HwDemo,
    RepresentationCheck,
}

impl ExperimentKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentKind::Simulate => "simulate",
            ExperimentKind::Classify => "classify",
            ExperimentKind::TableSweep => "table_sweep",
            ExperimentKind::Scattering => "scattering",
            ExperimentKind::Moments => "moments",
            ExperimentKind::LevinsonDemo => "levinson_demo",
            ExperimentKind::HwDemo => "hw_demo",
            ExperimentKind::RepresentationCheck => "representation_check",
        }
    }
}

/// Periodic box `[0, L)ⁿ` sampled with `points_per_dim` points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoxGrid {
    pub dim: usize,
    pub points_per_dim: usize,
    #[serde(default = "default_box_length")]
    pub box_length: f64,
}

fn default_box_length() -> f64 {
    2.0 * std::f64::consts::PI * 1e3
}

impl BoxGrid {
    pub fn spacing(&self) -> f64 {
        2.0 * std::f64::consts::PI / self.box_length
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=3).contains(&self.dim) {
            return Err(Error::Config(format!("grid.dim = {} must be 1, 2 or 3", self.dim)));
        }
        if self.points_per_dim < 2 || !self.points_per_dim.is_power_of_two() {
            return Err(Error::Config(format!("grid.points_per_dim = {} must be a power of two", self.points_per_dim)));
        }
        if !(self.box_length > 0.0 && self.box_length.is_finite()) {
            return Err(Error::Config(format!("grid.box_length = {} must be positive", self.box_length)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadialSpec {
    pub dim: usize,
    #[serde(default = "default_radial_lo")]
    pub lo: f64,
    #[serde(default = "default_radial_hi")]
    pub hi: f64,
    #[serde(default = "default_radial_points")]
    pub points: usize,
}

fn default_radial_lo() -> f64 {
    1e-4
}
fn default_radial_hi() -> f64 {
    64.0
}
fn default_radial_points() -> usize {
    256
}

impl Default for RadialSpec {
    fn default() -> Self {
        RadialSpec { dim: 1, lo: default_radial_lo(), hi: default_radial_hi(), points: default_radial_points() }
    }
}

impl RadialSpec {
    pub fn build(&self) -> Result<RadialGrid> {
        RadialGrid::log(self.dim, self.lo, self.hi, self.points)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: usize,
    #[serde(default = "default_window")]
    pub fit_window: (f64, f64),
}

fn default_t_final() -> f64 {
    1e4
}
fn default_checkpoints() -> usize {
    41
}
fn default_window() -> (f64, f64) {
    (1e2, 1e4)
}

impl Default for TimeSpec {
    fn default() -> Self {
        TimeSpec { t_final: default_t_final(), checkpoints: default_checkpoints(), fit_window: default_window() }
    }
}

impl TimeSpec {
    /// `0` followed by log-spaced times from `min(1, t_final)` to `t_final`.
    pub fn checkpoints(&self) -> Vec<f64> {
        let mut out = vec![0.0];
        out.extend(crate::estimates::log_times(self.t_final.min(1.0), self.t_final, self.checkpoints.max(2) - 1));
        out.dedup();
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_ode_tol")]
    pub ode: f64,
    #[serde(default = "default_exponent_tol")]
    pub exponent: f64,
    #[serde(default = "default_scattering_tol")]
    pub scattering: f64,
}

fn default_ode_tol() -> f64 {
    1e-10
}
fn default_exponent_tol() -> f64 {
    crate::estimates::EXPONENT_TOL
}
fn default_scattering_tol() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances { ode: default_ode_tol(), exponent: default_exponent_tol(), scattering: default_scattering_tol() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepCell {
    pub b0: f64,
    pub m0: f64,
    #[serde(default = "one")]
    pub sigma: f64,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default)]
    pub cells: Vec<SweepCell>,
    #[serde(default = "default_xi_low")]
    pub xi_low: f64,
    /// Defaults to `2N`.
    #[serde(default)]
    pub xi_high: Option<f64>,
}

fn default_xi_low() -> f64 {
    1e-4
}

impl Default for SweepSpec {
    fn default() -> Self {
        SweepSpec { cells: Vec::new(), xi_low: default_xi_low(), xi_high: None }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MomentSpec {
    #[serde(default = "default_moment_slack")]
    pub slack: f64,
    #[serde(default = "one_usize")]
    pub dim: usize,
}

fn default_moment_slack() -> f64 {
    0.1
}
fn one_usize() -> usize {
    1
}

impl Default for MomentSpec {
    fn default() -> Self {
        MomentSpec { slack: default_moment_slack(), dim: 1 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevinsonSpec {
    #[serde(default = "default_xi_low")]
    pub xi: f64,
    #[serde(default = "one")]
    pub tau0: f64,
    /// Bound on `‖V(t)t^{−μ} − e‖` at half the zone boundary.
    #[serde(default = "default_levinson_residual")]
    pub max_residual: f64,
}

fn default_levinson_residual() -> f64 {
    0.01
}

impl Default for LevinsonSpec {
    fn default() -> Self {
        LevinsonSpec { xi: default_xi_low(), tau0: 1.0, max_residual: default_levinson_residual() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HwSpec {
    #[serde(default = "default_hw_sigma")]
    pub sigma: f64,
    #[serde(default = "default_hw_horizon")]
    pub horizon: f64,
    #[serde(default = "default_window")]
    pub window: (f64, f64),
    /// Largest admissible ratio of the transformed to the untransformed tail.
    #[serde(default = "default_hw_ratio")]
    pub max_ratio: f64,
}

fn default_hw_sigma() -> f64 {
    1.5
}
fn default_hw_horizon() -> f64 {
    1e8
}
fn default_hw_ratio() -> f64 {
    0.1
}

impl Default for HwSpec {
    fn default() -> Self {
        HwSpec { sigma: default_hw_sigma(), horizon: default_hw_horizon(), window: default_window(), max_ratio: default_hw_ratio() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RepresentationSpec {
    #[serde(default = "default_rep_k")]
    pub k: usize,
    #[serde(default = "default_rep_points")]
    pub points: usize,
    #[serde(default = "one_u64")]
    pub seed: u64,
    #[serde(default = "default_rep_tol")]
    pub max_error: f64,
}

fn default_rep_k() -> usize {
    2
}
fn default_rep_points() -> usize {
    20
}
fn one_u64() -> u64 {
    1
}
fn default_rep_tol() -> f64 {
    1e-6
}

impl Default for RepresentationSpec {
    fn default() -> Self {
        RepresentationSpec { k: default_rep_k(), points: default_rep_points(), seed: 1, max_error: default_rep_tol() }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema: u32,
    #[serde(default)]
    pub experiment: Option<ExperimentKind>,
    #[serde(default)]
    pub model: Option<ModelSpec>,
    #[serde(default)]
    pub zone: ZoneConfig,
    #[serde(default)]
    pub grid: Option<BoxGrid>,
    #[serde(default)]
    pub radial: Option<RadialSpec>,
    #[serde(default)]
    pub data: Option<DataProfile>,
    #[serde(default)]
    pub times: TimeSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub sweep: SweepSpec,
    #[serde(default)]
    pub moments: MomentSpec,
    #[serde(default)]
    pub levinson: LevinsonSpec,
    #[serde(default)]
    pub hw: HwSpec,
    #[serde(default)]
    pub representation: RepresentationSpec,
    /// Directory that relative paths in the document resolve against.
    #[serde(skip)]
    pub base_dir: PathBuf,
}

/// Command-line values that replace the corresponding config fields.
#[derive(Clone, Copy, Debug, Default)]
pub struct Overrides {
    pub b0: Option<f64>,
    pub m0: Option<f64>,
    pub sigma: Option<f64>,
    pub n: Option<f64>,
    pub t_final: Option<f64>,
    pub tol: Option<f64>,
}

impl ExperimentConfig {
    pub fn new(kind: ExperimentKind) -> Self {
        ExperimentConfig {
            schema: SCHEMA_VERSION,
            experiment: Some(kind),
            model: None,
            zone: ZoneConfig::default(),
            grid: None,
            radial: None,
            data: None,
            times: TimeSpec::default(),
            tolerances: Tolerances::default(),
            sweep: SweepSpec::default(),
            moments: MomentSpec::default(),
            levinson: LevinsonSpec::default(),
            hw: HwSpec::default(),
            representation: RepresentationSpec::default(),
            base_dir: PathBuf::from("."),
        }
    }

    /// Parses a document; errors carry the line and column of the offending field.
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = serde_json::from_str(text).map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_else(|| PathBuf::from("."));
        Self::from_json(&text, &base).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Config(format!("schema = {} is not supported (expected {SCHEMA_VERSION})", self.schema)));
        }
        if self.model.is_some() {
            self.model()?;
        }
        if !(self.zone.n > 0.0 && self.zone.n.is_finite()) {
            return Err(Error::Config(format!("zone.N = {} must be positive", self.zone.n)));
        }
        if let Some(g) = &self.grid {
            g.validate()?;
        }
        if let Some(r) = &self.radial {
            if !(1..=3).contains(&r.dim) {
                return Err(Error::Config(format!("radial.dim = {} must be 1, 2 or 3", r.dim)));
            }
            if !(r.lo > 0.0 && r.hi > r.lo) || r.points < 16 {
                return Err(Error::Config("radial grid needs 0 < lo < hi and at least 16 points".into()));
            }
        }
        if let Some(d) = &self.data {
            d.load(&self.base_dir).map_err(|e| Error::Config(format!("data: {e}")))?;
        }
        let t = &self.times;
        if !(t.t_final > 0.0 && t.t_final.is_finite()) || t.checkpoints < 2 {
            return Err(Error::Config("times need t_final > 0 and at least 2 checkpoints".into()));
        }
        if !(t.fit_window.0 > 0.0 && t.fit_window.1 > t.fit_window.0) {
            return Err(Error::Config(format!("times.fit_window = {:?} must satisfy 0 < lo < hi", t.fit_window)));
        }
        let tol = &self.tolerances;
        if !(tol.ode > 0.0 && tol.exponent > 0.0 && tol.scattering > 0.0) {
            return Err(Error::Config("tolerances must be positive".into()));
        }
        for (i, cell) in self.sweep.cells.iter().enumerate() {
            if !(cell.b0.is_finite() && cell.m0.is_finite() && cell.sigma >= 1.0) {
                return Err(Error::Config(format!("sweep.cells[{i}] = {cell:?} needs finite b0, m0 and sigma >= 1")));
            }
        }
        if !(self.sweep.xi_low > 0.0) || self.sweep.xi_high.is_some_and(|x| !(x > 0.0)) {
            return Err(Error::Config("sweep frequencies must be positive".into()));
        }
        if !(self.moments.slack >= 0.0) || !(1..=3).contains(&self.moments.dim) {
            return Err(Error::Config("moments need slack >= 0 and dim in 1..=3".into()));
        }
        if !(self.levinson.xi > 0.0 && self.levinson.tau0 >= 1.0) {
            return Err(Error::Config("levinson needs xi > 0 and tau0 >= 1".into()));
        }
        if !(self.hw.sigma > 1.0 && self.hw.sigma <= 2.0 && self.hw.horizon > self.hw.window.1) {
            return Err(Error::Config("hw needs 1 < sigma <= 2 and a horizon beyond the window".into()));
        }
        if self.representation.k == 0 || self.representation.points == 0 {
            return Err(Error::Config("representation needs k >= 1 and at least one point".into()));
        }
        Ok(())
    }

    pub fn model(&self) -> Result<CoefficientModel> {
        match &self.model {
            Some(spec) => spec.build_relative_to(&self.base_dir).map_err(|e| Error::Config(format!("model: {e}"))),
            None => Err(Error::Config("this experiment needs a model".into())),
        }
    }

    pub fn data(&self) -> Result<DataProfile> {
        match &self.data {
            Some(d) => d.load(&self.base_dir),
            None => Err(Error::Config("this experiment needs initial data".into())),
        }
    }

    pub fn radial_grid(&self, fallback_dim: usize) -> Result<RadialGrid> {
        self.radial.unwrap_or(RadialSpec { dim: fallback_dim, ..RadialSpec::default() }).build()
    }

    pub fn apply(&mut self, o: &Overrides) -> Result<()> {
        if o.b0.is_some() || o.m0.is_some() || o.sigma.is_some() {
            match &mut self.model {
                Some(spec) => {
                    let (b0, m0, sigma) = match spec {
                        ModelSpec::PureScaleInvariant { b0, m0, sigma, .. }
                        | ModelSpec::BoundedPerturbation { b0, m0, sigma, .. }
                        | ModelSpec::LogPerturbation { b0, m0, sigma, .. }
                        | ModelSpec::Tabulated { b0, m0, sigma, .. } => (b0, m0, sigma),
                    };
                    *b0 = o.b0.unwrap_or(*b0);
                    *m0 = o.m0.unwrap_or(*m0);
                    *sigma = o.sigma.unwrap_or(*sigma);
                }
                None => {
                    let (Some(b0), Some(m0)) = (o.b0, o.m0) else {
                        return Err(Error::Config("without a model in the config both --b0 and --m0 are required".into()));
                    };
                    self.model = Some(CoefficientModel::pure(b0, m0).with_sigma(o.sigma.unwrap_or(1.0)).spec());
                }
            }
        }
        if let Some(n) = o.n {
            self.zone = ZoneConfig::new(n);
        }
        if let Some(t) = o.t_final {
            self.times.t_final = t;
        }
        if let Some(tol) = o.tol {
            self.tolerances.ode = tol;
        }
        self.validate()
    }

    /// Canonical JSON: object keys sorted, no whitespace.
    pub fn canonical_json(&self) -> String {
        let value = serde_json::to_value(self).expect("config serializes");
        serde_json::to_string(&value).expect("value serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_fields_are_rejected_with_position() {
        let text = "{\n  \"schema\": 1,\n  \"modle\": {}\n}";
        let err = ExperimentConfig::from_json(text, Path::new(".")).unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(err.contains("modle"), "{err}");
    }

    #[test]
    fn schema_version_is_checked() {
        let err = ExperimentConfig::from_json("{\"schema\": 2}", Path::new(".")).unwrap_err();
        assert!(err.to_string().contains("schema"));
    }

    #[test]
    fn overrides_build_a_pure_model() {
        let mut cfg = ExperimentConfig::new(ExperimentKind::Classify);
        cfg.apply(&Overrides { b0: Some(4.0), m0: Some(0.0), ..Default::default() }).unwrap();
        let m = cfg.model().unwrap();
        assert_eq!((m.b0, m.m0), (4.0, 0.0));
        let mut cfg = ExperimentConfig::new(ExperimentKind::Classify);
        assert!(cfg.apply(&Overrides { b0: Some(4.0), ..Default::default() }).is_err());
    }
}
