//! Coefficient families `b(t)`, `m(t)`, the weight `λ(t) = exp(½∫₀ᵗ b)`,
//! hypothesis checks, and the classification of the limits `(b₀, m₀)`.

use crate::error::{Error, Result};
use crate::jet::Jet;
use crate::quad::{self, QuadOptions};
use crate::zones::ZoneLabel;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use std::sync::Arc;

const E: f64 = std::f64::consts::E;

/// Decaying profile `amplitude·(1+t)^(−decay)` used for bounded perturbations.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerProfile {
    pub amplitude: f64,
    pub decay: f64,
}

impl PowerProfile {
    pub fn new(amplitude: f64, decay: f64) -> Self {
        PowerProfile { amplitude, decay }
    }

    pub fn zero() -> Self {
        PowerProfile { amplitude: 0.0, decay: 0.0 }
    }

    pub fn value(&self, t: f64) -> f64 {
        self.amplitude * (1.0 + t).powf(-self.decay)
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    PureScaleInvariant,
    BoundedPerturbation { h1: PowerProfile, h2: PowerProfile },
    LogPerturbation { b1: f64, m1: f64, gamma: f64 },
    Tabulated(Arc<TabulatedCoefficients>),
}

/// An evaluable pair `(b, m)` together with the limits `b₀ = lim (1+t)b`,
/// `m₀ = lim (1+t)²m`, the integrability index `σ` and the smoothness order `ℓ`.
#[derive(Clone, Debug)]
pub struct CoefficientModel {
    pub b0: f64,
    pub m0: f64,
    pub sigma: f64,
    pub ell: usize,
    pub family: Family,
}

/// JSON form of a model: `{"family": ..., "b0": ..., "m0": ..., ...}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    PureScaleInvariant {
        b0: f64,
        m0: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_ell")]
        ell: usize,
    },
    BoundedPerturbation {
        b0: f64,
        m0: f64,
        h1: PowerProfile,
        h2: PowerProfile,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_ell")]
        ell: usize,
    },
    LogPerturbation {
        b0: f64,
        m0: f64,
        b1: f64,
        m1: f64,
        gamma: f64,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_ell")]
        ell: usize,
    },
    Tabulated {
        b0: f64,
        m0: f64,
        b_csv: PathBuf,
        m_csv: PathBuf,
        #[serde(default = "default_sigma")]
        sigma: f64,
        #[serde(default = "default_tab_ell")]
        ell: usize,
    },
}

fn default_sigma() -> f64 {
    1.0
}
fn default_ell() -> usize {
    4
}
fn default_tab_ell() -> usize {
    2
}

impl ModelSpec {
    pub fn build(&self) -> Result<CoefficientModel> {
        self.build_relative_to(Path::new("."))
    }

    /// Builds the model, resolving relative CSV paths against `base`.
    pub fn build_relative_to(&self, base: &Path) -> Result<CoefficientModel> {
        let model = match self.clone() {
            ModelSpec::PureScaleInvariant { b0, m0, sigma, ell } => {
                CoefficientModel { b0, m0, sigma, ell, family: Family::PureScaleInvariant }
            }
            ModelSpec::BoundedPerturbation { b0, m0, h1, h2, sigma, ell } => {
                CoefficientModel { b0, m0, sigma, ell, family: Family::BoundedPerturbation { h1, h2 } }
            }
            ModelSpec::LogPerturbation { b0, m0, b1, m1, gamma, sigma, ell } => {
                CoefficientModel { b0, m0, sigma, ell, family: Family::LogPerturbation { b1, m1, gamma } }
            }
            ModelSpec::Tabulated { b0, m0, b_csv, m_csv, sigma, ell } => {
                let resolve = |p: &PathBuf| if p.is_absolute() { p.clone() } else { base.join(p) };
                let table = TabulatedCoefficients::from_csv(&resolve(&b_csv), &resolve(&m_csv))?;
                let mut table = table;
                table.b_source = Some(b_csv);
                table.m_source = Some(m_csv);
                CoefficientModel { b0, m0, sigma, ell, family: Family::Tabulated(Arc::new(table)) }
            }
        };
        model.validate()?;
        Ok(model)
    }
}

impl CoefficientModel {
    pub fn pure(b0: f64, m0: f64) -> Self {
        CoefficientModel { b0, m0, sigma: 1.0, ell: default_ell(), family: Family::PureScaleInvariant }
    }

    pub fn bounded(b0: f64, m0: f64, h1: PowerProfile, h2: PowerProfile) -> Self {
        CoefficientModel { b0, m0, sigma: 1.0, ell: default_ell(), family: Family::BoundedPerturbation { h1, h2 } }
    }

    pub fn log_perturbation(b0: f64, m0: f64, b1: f64, m1: f64, gamma: f64) -> Self {
        CoefficientModel { b0, m0, sigma: 1.0, ell: default_ell(), family: Family::LogPerturbation { b1, m1, gamma } }
    }

    /// The bounded-perturbation preset used throughout the examples and the
    /// acceptance suite: `b₀ = 2`, `m₀ = 3/4`, `h₁ = h₂ = ½(1+t)^(−1/2)`.
    pub fn example_bounded() -> Self {
        Self::bounded(2.0, 0.75, PowerProfile::new(0.5, 0.5), PowerProfile::new(0.5, 0.5))
    }

    pub fn tabulated(b0: f64, m0: f64, table: TabulatedCoefficients) -> Self {
        CoefficientModel { b0, m0, sigma: 1.0, ell: default_tab_ell(), family: Family::Tabulated(Arc::new(table)) }
    }

    pub fn with_sigma(mut self, sigma: f64) -> Self {
        self.sigma = sigma;
        self
    }

    pub fn with_ell(mut self, ell: usize) -> Self {
        self.ell = ell;
        self
    }

    /// The unperturbed model with the same limits.
    pub fn leading_order(&self) -> Self {
        CoefficientModel { b0: self.b0, m0: self.m0, sigma: self.sigma, ell: self.ell, family: Family::PureScaleInvariant }
    }

    pub fn is_free(&self) -> bool {
        self.b0 == 0.0
            && self.m0 == 0.0
            && match &self.family {
                Family::PureScaleInvariant => true,
                Family::BoundedPerturbation { h1, h2 } => h1.amplitude == 0.0 && h2.amplitude == 0.0,
                Family::LogPerturbation { b1, m1, .. } => *b1 == 0.0 && *m1 == 0.0,
                Family::Tabulated(_) => false,
            }
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b0.is_finite() || !self.m0.is_finite() {
            return Err(Error::InvalidParameter("b0 and m0 must be finite".into()));
        }
        if !(1.0..=2.0).contains(&self.sigma) {
            return Err(Error::InvalidParameter(format!("sigma = {} must lie in [1, 2]", self.sigma)));
        }
        if self.ell < 1 {
            return Err(Error::InvalidParameter("ell must be at least 1".into()));
        }
        match &self.family {
            Family::PureScaleInvariant => {}
            Family::BoundedPerturbation { h1, h2 } => {
                for h in [h1, h2] {
                    if !h.amplitude.is_finite() || !h.decay.is_finite() || h.decay < 0.0 {
                        return Err(Error::InvalidParameter("perturbation profiles need finite amplitude and decay >= 0".into()));
                    }
                }
            }
            Family::LogPerturbation { b1, m1, gamma } => {
                if !(*gamma > 0.5 && *gamma <= 1.0) {
                    return Err(Error::InvalidParameter(format!("gamma = {gamma} must lie in (1/2, 1]")));
                }
                if !b1.is_finite() || !m1.is_finite() {
                    return Err(Error::InvalidParameter("b1 and m1 must be finite".into()));
                }
            }
            Family::Tabulated(_) => {
                if self.ell > 2 {
                    return Err(Error::InvalidParameter("tabulated coefficients support ell <= 2".into()));
                }
            }
        }
        Ok(())
    }

    pub fn spec(&self) -> ModelSpec {
        let (b0, m0, sigma, ell) = (self.b0, self.m0, self.sigma, self.ell);
        match &self.family {
            Family::PureScaleInvariant => ModelSpec::PureScaleInvariant { b0, m0, sigma, ell },
            Family::BoundedPerturbation { h1, h2 } => ModelSpec::BoundedPerturbation { b0, m0, h1: *h1, h2: *h2, sigma, ell },
            Family::LogPerturbation { b1, m1, gamma } => {
                ModelSpec::LogPerturbation { b0, m0, b1: *b1, m1: *m1, gamma: *gamma, sigma, ell }
            }
            Family::Tabulated(t) => ModelSpec::Tabulated {
                b0,
                m0,
                b_csv: t.b_source.clone().unwrap_or_default(),
                m_csv: t.m_source.clone().unwrap_or_default(),
                sigma,
                ell,
            },
        }
    }

    /// `b(t)`.
    pub fn b(&self, t: f64) -> f64 {
        let tau = 1.0 + t;
        match &self.family {
            Family::PureScaleInvariant => self.b0 / tau,
            Family::BoundedPerturbation { h1, .. } => (self.b0 + h1.value(t)) / tau,
            Family::LogPerturbation { b1, gamma, .. } => {
                let s = E + t;
                self.b0 / tau + b1 / (s * s.ln().powf(*gamma))
            }
            Family::Tabulated(tab) => tab.b.value(t, 1.0),
        }
    }

    /// `m(t)`.
    pub fn m(&self, t: f64) -> f64 {
        let tau = 1.0 + t;
        match &self.family {
            Family::PureScaleInvariant => self.m0 / (tau * tau),
            Family::BoundedPerturbation { h2, .. } => (self.m0 + h2.value(t)) / (tau * tau),
            Family::LogPerturbation { m1, gamma, .. } => {
                let s = E + t;
                self.m0 / (tau * tau) + m1 / (s * s * s.ln().powf(*gamma))
            }
            Family::Tabulated(tab) => tab.m.value(t, 2.0),
        }
    }

    /// `(1+t)b(t) − b₀`, evaluated without cancellation for the closed forms.
    pub fn b_deviation(&self, t: f64) -> f64 {
        let tau = 1.0 + t;
        match &self.family {
            Family::PureScaleInvariant => 0.0,
            Family::BoundedPerturbation { h1, .. } => h1.value(t),
            Family::LogPerturbation { b1, gamma, .. } => {
                let s = E + t;
                tau * b1 / (s * s.ln().powf(*gamma))
            }
            Family::Tabulated(_) => tau * self.b(t) - self.b0,
        }
    }

    /// `(1+t)²m(t) − m₀`.
    pub fn m_deviation(&self, t: f64) -> f64 {
        let tau = 1.0 + t;
        match &self.family {
            Family::PureScaleInvariant => 0.0,
            Family::BoundedPerturbation { h2, .. } => h2.value(t),
            Family::LogPerturbation { m1, gamma, .. } => {
                let s = E + t;
                (tau / s).powi(2) * m1 / s.ln().powf(*gamma)
            }
            Family::Tabulated(_) => tau * tau * self.m(t) - self.m0,
        }
    }

    /// Taylor jets of `b` and `m` in the variable `s` with `t = t0 + scale·s`.
    pub fn jets(&self, t0: f64, scale: f64, len: usize) -> Result<(Jet, Jet)> {
        if len > self.ell + 1 {
            return Err(Error::UnsupportedOrder { requested: len - 1, available: self.ell });
        }
        let tau = Jet::variable(1.0 + t0, scale, len);
        let inv = tau.recip();
        let inv2 = &inv * &inv;
        let lead_b = inv.scale(self.b0);
        let lead_m = inv2.scale(self.m0);
        Ok(match &self.family {
            Family::PureScaleInvariant => (lead_b, lead_m),
            Family::BoundedPerturbation { h1, h2 } => {
                let pb = tau.powf(-1.0 - h1.decay).scale(h1.amplitude);
                let pm = tau.powf(-2.0 - h2.decay).scale(h2.amplitude);
                (&lead_b + &pb, &lead_m + &pm)
            }
            Family::LogPerturbation { b1, m1, gamma } => {
                let s = Jet::variable(E + t0, scale, len);
                let lg = s.ln().powf(-*gamma);
                let sinv = s.recip();
                let pb = (&sinv * &lg).scale(*b1);
                let pm = (&(&sinv * &sinv) * &lg).scale(*m1);
                (&lead_b + &pb, &lead_m + &pm)
            }
            Family::Tabulated(tab) => (tab.b.jet(t0, scale, len, 1.0)?, tab.m.jet(t0, scale, len, 2.0)?),
        })
    }

    /// `(∂ᵏb(t), ∂ᵏm(t))` for `k = order ≤ ℓ`.
    pub fn eval_coefficients(&self, t: f64, order: usize) -> Result<(f64, f64)> {
        if !(t >= 0.0) {
            return Err(Error::InvalidParameter(format!("t = {t} must be non-negative")));
        }
        if order > self.ell {
            return Err(Error::UnsupportedOrder { requested: order, available: self.ell });
        }
        let (b, m) = self.jets(t, 1.0, order + 1)?;
        Ok((b.derivative_s(order).re, m.derivative_s(order).re))
    }

    /// `ln λ(t) = ½∫₀ᵗ b(τ)dτ`.
    pub fn log_lambda(&self, t: f64) -> f64 {
        let lt = (1.0 + t).ln();
        match &self.family {
            Family::PureScaleInvariant => 0.5 * self.b0 * lt,
            Family::BoundedPerturbation { h1, .. } => {
                let extra = if h1.decay == 0.0 {
                    h1.amplitude * lt
                } else {
                    h1.amplitude * (-(-h1.decay * lt).exp_m1()) / h1.decay
                };
                0.5 * (self.b0 * lt + extra)
            }
            Family::LogPerturbation { b1, gamma, .. } => {
                let l = (E + t).ln();
                let g = if (*gamma - 1.0).abs() < 1e-15 {
                    l.ln()
                } else {
                    (l.powf(1.0 - gamma) - 1.0) / (1.0 - gamma)
                };
                0.5 * (self.b0 * lt + b1 * g)
            }
            Family::Tabulated(tab) => 0.5 * tab.integral_b(t),
        }
    }

    pub fn lambda(&self, t: f64) -> f64 {
        self.log_lambda(t).exp()
    }

    pub fn classify_regime(&self) -> RegimeClassification {
        classify_regime(self.b0, self.m0)
    }

    /// Exponent predicted by the estimate tables for the given zone.
    pub fn predicted_decay(&self, zone: ZoneLabel) -> Result<f64> {
        let cls = self.classify_regime();
        let (b0, m0) = (self.b0, self.m0);
        let four_m0 = 4.0 * m0;
        let disc = (b0 - 1.0) * (b0 - 1.0);
        let large = b0 * (b0 - 2.0);
        let below_rows = four_m0 < large && four_m0 < 0.0;
        let row_ok = !below_rows && (self.sigma == 1.0 || four_m0 < disc);
        if !row_ok {
            let table = if self.sigma == 1.0 { "the rate table" } else { "the rate table for sigma != 1" };
            return Err(Error::RegimeUnsupported(format!(
                "(b0, m0) = ({b0}, {m0}) with sigma = {} is not covered by {table}",
                self.sigma
            )));
        }
        Ok(match zone {
            ZoneLabel::Diss => cls.mu_plus.re,
            ZoneLabel::HypSmall | ZoneLabel::HypLarge => -b0 / 2.0,
        })
    }

    /// Numerical check of the smoothness and limit hypotheses up to horizon `horizon`.
    pub fn check_hypotheses(&self, horizon: f64, samples: usize) -> Result<HypothesisReport> {
        if !(horizon > 1.0) {
            return Err(Error::InvalidParameter("horizon must exceed 1".into()));
        }
        let samples = samples.max(16);
        let mut times = vec![0.0];
        let (lo, hi) = (1e-3f64.ln(), horizon.ln());
        times.extend((0..samples).map(|i| (lo + (hi - lo) * i as f64 / (samples - 1) as f64).exp()));

        let orders = self.ell + 1;
        let mut sup_b = vec![0.0f64; orders];
        let mut sup_m = vec![0.0f64; orders];
        let mut head_b = vec![0.0f64; orders];
        let mut head_m = vec![0.0f64; orders];
        for &t in &times {
            let scale = 1.0 + t;
            let (jb, jm) = self.jets(t, scale, orders)?;
            for k in 0..orders {
                let wb = scale * jb.derivative_s(k).norm();
                let wm = scale * scale * jm.derivative_s(k).norm();
                sup_b[k] = sup_b[k].max(wb);
                sup_m[k] = sup_m[k].max(wm);
                if t <= horizon / 2.0 {
                    head_b[k] = head_b[k].max(wb);
                    head_m[k] = head_m[k].max(wm);
                }
            }
        }
        let growth = sup_b
            .iter()
            .zip(&head_b)
            .chain(sup_m.iter().zip(&head_m))
            .map(|(s, h)| (s - h) / (1.0 + h))
            .fold(0.0, f64::max);
        let finite = sup_b.iter().chain(&sup_m).all(|v| v.is_finite());
        let hyp1_pass = finite && growth <= HYP_TOL;

        let sigma = self.sigma;
        let fb = |t: f64| self.b_deviation(t).abs().powf(sigma);
        let fm = |t: f64| self.m_deviation(t).abs().powf(sigma);
        let opts = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-11, max_intervals: 2000 };
        let x_end = horizon.ln();
        let pieces = (x_end.ceil() as usize).max(1);
        let mut cum = Vec::with_capacity(pieces);
        let (mut ib, mut im) = (0.0, 0.0);
        for j in 0..pieces {
            let x0 = x_end * j as f64 / pieces as f64;
            let x1 = x_end * (j + 1) as f64 / pieces as f64;
            ib += quad::integrate(|x| fb(x.exp()), x0, x1, opts).value;
            im += quad::integrate(|x| fm(x.exp()), x0, x1, opts).value;
            cum.push(HypothesisSample { horizon: x1.exp(), b_integral: ib, m_integral: im });
        }
        let tail_b = quad::integrate(|x| fb(x.exp()), x_end - std::f64::consts::LN_2, x_end, opts).value;
        let tail_m = quad::integrate(|x| fm(x.exp()), x_end - std::f64::consts::LN_2, x_end, opts).value;
        let limits_ok = self.b_deviation(horizon).abs() < 1.0 + self.b0.abs() * 1e3;
        let hyp2_pass = limits_ok && tail_b < HYP_TOL && tail_m < HYP_TOL;

        Ok(HypothesisReport {
            horizon,
            sigma,
            hyp1_b: sup_b,
            hyp1_m: sup_m,
            hyp1_tail_growth: growth,
            hyp2: cum,
            hyp2_tail_b: tail_b,
            hyp2_tail_m: tail_m,
            hyp1_pass,
            hyp2_pass,
        })
    }
}

/// Tolerance for the finite-horizon hypothesis verdicts.
pub const HYP_TOL: f64 = 1e-3;

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisSample {
    pub horizon: f64,
    pub b_integral: f64,
    pub m_integral: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct HypothesisReport {
    pub horizon: f64,
    pub sigma: f64,
    /// `sup (1+t)^{k+1}|∂ᵏb|` for `k = 0..=ℓ`.
    pub hyp1_b: Vec<f64>,
    /// `sup (1+t)^{k+2}|∂ᵏm|` for `k = 0..=ℓ`.
    pub hyp1_m: Vec<f64>,
    /// Relative growth of the running suprema over `[T/2, T]`.
    pub hyp1_tail_growth: f64,
    /// Cumulative σ-integrals of `|(1+t)b − b₀|` and `|(1+t)²m − m₀|` over `[1, T_j]`.
    pub hyp2: Vec<HypothesisSample>,
    pub hyp2_tail_b: f64,
    pub hyp2_tail_m: f64,
    pub hyp1_pass: bool,
    pub hyp2_pass: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegimeCase {
    ComplexPair,
    DoubleRoot,
    RealSmallMuplus,
    RealLargeMuplus,
}

impl RegimeCase {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeCase::ComplexPair => "complex_pair",
            RegimeCase::DoubleRoot => "double_root",
            RegimeCase::RealSmallMuplus => "real_small_muplus",
            RegimeCase::RealLargeMuplus => "real_large_muplus",
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegimeClassification {
    pub b0: f64,
    pub m0: f64,
    pub mu_plus: Complex64,
    pub mu_minus: Complex64,
    pub case: RegimeCase,
    pub dominant_exponent: f64,
    /// Distinct roots: `4m₀ ≠ (b₀−1)²`.
    pub distinct_roots: bool,
    /// Real distinct roots: `4m₀ < (b₀−1)²`.
    pub real_distinct_roots: bool,
    /// `b₀(b₀−2) < 4m₀`, where the low-frequency rate is at most the hyperbolic one.
    pub hyperbolic_dominates: bool,
}

/// Roots of `μ² + (b₀+1)μ + (b₀+m₀) = 0` and the four-way case split.
pub fn classify_regime(b0: f64, m0: f64) -> RegimeClassification {
    let four_m0 = 4.0 * m0;
    let sq = (b0 - 1.0) * (b0 - 1.0);
    let large = b0 * (b0 - 2.0);
    let center = -(b0 + 1.0) / 2.0;
    let quarter = (sq - four_m0) / 4.0;
    let (mu_plus, mu_minus) = if four_m0 > sq {
        let w = (-quarter).sqrt();
        (Complex64::new(center, w), Complex64::new(center, -w))
    } else {
        let w = quarter.sqrt();
        (Complex64::new(center + w, 0.0), Complex64::new(center - w, 0.0))
    };
    let case = if four_m0 > sq {
        RegimeCase::ComplexPair
    } else if four_m0 == sq {
        RegimeCase::DoubleRoot
    } else if four_m0 < large {
        RegimeCase::RealLargeMuplus
    } else {
        RegimeCase::RealSmallMuplus
    };
    RegimeClassification {
        b0,
        m0,
        mu_plus,
        mu_minus,
        case,
        dominant_exponent: mu_plus.re.max(-b0 / 2.0),
        distinct_roots: four_m0 != sq,
        real_distinct_roots: four_m0 < sq,
        hyperbolic_dominates: large < four_m0,
    }
}

/// A sampled function of time with a natural cubic spline interpolant and a
/// scale-invariant continuation `v_end·((1+t_end)/(1+t))^p` beyond the table.
#[derive(Clone, Debug)]
pub struct Table {
    t: Vec<f64>,
    v: Vec<f64>,
    second: Vec<f64>,
}

impl Table {
    pub fn new(t: Vec<f64>, v: Vec<f64>) -> Result<Self> {
        if t.len() != v.len() || t.len() < 4 {
            return Err(Error::InvalidParameter("a coefficient table needs at least 4 rows".into()));
        }
        if !t.windows(2).all(|w| w[1] > w[0]) {
            return Err(Error::InvalidParameter("table times must strictly increase".into()));
        }
        if t[0] > 0.0 {
            return Err(Error::InvalidParameter("table must start at t <= 0".into()));
        }
        let n = t.len();
        let mut second = vec![0.0; n];
        let mut u = vec![0.0; n];
        for i in 1..n - 1 {
            let sig = (t[i] - t[i - 1]) / (t[i + 1] - t[i - 1]);
            let p = sig * second[i - 1] + 2.0;
            second[i] = (sig - 1.0) / p;
            let d = (v[i + 1] - v[i]) / (t[i + 1] - t[i]) - (v[i] - v[i - 1]) / (t[i] - t[i - 1]);
            u[i] = (6.0 * d / (t[i + 1] - t[i - 1]) - sig * u[i - 1]) / p;
        }
        second[n - 1] = 0.0;
        for k in (0..n - 1).rev() {
            second[k] = second[k] * second[k + 1] + u[k];
        }
        Ok(Table { t, v, second })
    }

    pub fn from_csv(path: &Path) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let (mut t, mut v) = (Vec::new(), Vec::new());
        for rec in rdr.records() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Config(format!("{}: expected two columns (t, value)", path.display())));
            }
            let parse = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("{}: cannot parse '{s}': {e}", path.display())))
            };
            t.push(parse(&rec[0])?);
            v.push(parse(&rec[1])?);
        }
        Table::new(t, v)
    }

    pub fn end(&self) -> f64 {
        *self.t.last().unwrap()
    }

    fn spline(&self, x: f64) -> f64 {
        let n = self.t.len();
        let k = self.t.partition_point(|&ti| ti <= x).clamp(1, n - 1);
        let (lo, hi) = (k - 1, k);
        let h = self.t[hi] - self.t[lo];
        let a = (self.t[hi] - x) / h;
        let b = (x - self.t[lo]) / h;
        a * self.v[lo]
            + b * self.v[hi]
            + ((a * a * a - a) * self.second[lo] + (b * b * b - b) * self.second[hi]) * h * h / 6.0
    }

    /// Value at `t`; `power` selects the continuation decay beyond the table.
    pub fn value(&self, t: f64, power: f64) -> f64 {
        let end = self.end();
        if t <= end {
            self.spline(t)
        } else {
            self.v[self.v.len() - 1] * ((1.0 + end) / (1.0 + t)).powf(power)
        }
    }

    fn jet(&self, t0: f64, scale: f64, len: usize, power: f64) -> Result<Jet> {
        if len > 3 {
            return Err(Error::UnsupportedOrder { requested: len - 1, available: 2 });
        }
        let h = (1e-6 * (1.0 + t0)).max(1e-8);
        let f0 = self.value(t0, power);
        let fp = self.value(t0 + h, power);
        let fm = self.value(t0 - h, power);
        let d1 = (fp - fm) / (2.0 * h);
        let d2 = (fp - 2.0 * f0 + fm) / (h * h);
        let all = [f0, d1 * scale, d2 * scale * scale / 2.0];
        Ok(Jet::from_coeffs(all[..len].iter().map(|&x| Complex64::new(x, 0.0)).collect()))
    }
}

/// Two tables `b(t)` and `m(t)` with cached cumulative integrals of `b`.
#[derive(Clone, Debug)]
pub struct TabulatedCoefficients {
    pub b: Table,
    pub m: Table,
    knots: Vec<f64>,
    cumulative: Vec<f64>,
    pub b_source: Option<PathBuf>,
    pub m_source: Option<PathBuf>,
}

const TABLE_QUAD: QuadOptions = QuadOptions { abs_tol: 1e-15, rel_tol: 1e-13, max_intervals: 200 };

impl TabulatedCoefficients {
    pub fn new(b: Table, m: Table) -> Self {
        let mut knots = vec![0.0];
        knots.extend(b.t.iter().copied().filter(|&x| x > 0.0));
        let mut cumulative = vec![0.0];
        for w in knots.windows(2) {
            let last = *cumulative.last().unwrap();
            cumulative.push(last + quad::integrate(|x| b.spline(x), w[0], w[1], TABLE_QUAD).value);
        }
        TabulatedCoefficients { b, m, knots, cumulative, b_source: None, m_source: None }
    }

    pub fn from_csv(b_path: &Path, m_path: &Path) -> Result<Self> {
        Ok(Self::new(Table::from_csv(b_path)?, Table::from_csv(m_path)?))
    }

    /// `∫₀ᵗ b`.
    fn integral_b(&self, t: f64) -> f64 {
        let end = self.b.end();
        if t <= end {
            let idx = self.knots.partition_point(|&k| k <= t).max(1) - 1;
            self.cumulative[idx] + quad::integrate(|x| self.b.spline(x), self.knots[idx], t, TABLE_QUAD).value
        } else {
            let v_end = self.b.v[self.b.v.len() - 1];
            self.cumulative.last().unwrap() + v_end * (1.0 + end) * ((1.0 + t) / (1.0 + end)).ln()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn classification_of_boundary_cells() {
        let c = classify_regime(0.0, 0.0);
        assert_eq!(c.case, RegimeCase::RealSmallMuplus);
        assert_eq!(c.mu_plus.re, 0.0);
        assert_eq!(c.mu_minus.re, -1.0);
        assert_eq!(classify_regime(2.0, 0.25).case, RegimeCase::DoubleRoot);
        assert_eq!(classify_regime(3.0, 0.0).case, RegimeCase::RealLargeMuplus);
    }

    #[test]
    fn tabulated_model_reproduces_closed_form() {
        let ts: Vec<f64> = (0..2001).map(|i| i as f64 * 0.05).collect();
        let b = Table::new(ts.clone(), ts.iter().map(|t| 2.0 / (1.0 + t)).collect()).unwrap();
        let m = Table::new(ts.clone(), ts.iter().map(|t| 1.0 / (1.0 + t).powi(2)).collect()).unwrap();
        let model = CoefficientModel::tabulated(2.0, 1.0, TabulatedCoefficients::new(b, m));
        let exact = CoefficientModel::pure(2.0, 1.0);
        for t in [0.3, 7.7, 55.0, 300.0] {
            assert!((model.b(t) - exact.b(t)).abs() < 1e-5);
            assert!((model.log_lambda(t) - exact.log_lambda(t)).abs() < 1e-5);
            let (db, _) = model.eval_coefficients(t, 1).unwrap();
            let (dbe, _) = exact.eval_coefficients(t, 1).unwrap();
            assert!((db - dbe).abs() < 1e-4);
        }
    }
}
