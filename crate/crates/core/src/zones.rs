//! Decomposition of the extended phase space `{(t, |ξ|)}` into the
//! dissipative zone `(1+t)|ξ| ≤ N` and the hyperbolic zone, the smooth
//! cutoffs subordinate to it, and the micro-energy weight `h(t, ξ)`.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneLabel {
    Diss,
    HypSmall,
    HypLarge,
}

impl ZoneLabel {
    pub fn as_str(&self) -> &'static str {
        match self {
            ZoneLabel::Diss => "diss",
            ZoneLabel::HypSmall => "hyp_small",
            ZoneLabel::HypLarge => "hyp_large",
        }
    }

    pub fn is_hyperbolic(&self) -> bool {
        !matches!(self, ZoneLabel::Diss)
    }
}

/// Who fixed the zone constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneConstantSource {
    Default,
    User,
    Diagonalization,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ZoneConfig {
    #[serde(rename = "N")]
    pub n: f64,
    #[serde(default = "default_source")]
    pub source: ZoneConstantSource,
}

fn default_source() -> ZoneConstantSource {
    ZoneConstantSource::User
}

impl Default for ZoneConfig {
    fn default() -> Self {
        ZoneConfig { n: 1.0, source: ZoneConstantSource::Default }
    }
}

fn bump(y: f64) -> f64 {
    if y > 0.0 {
        (-1.0 / y).exp()
    } else {
        0.0
    }
}

/// Smooth step: 1 on `[0, 1]`, 0 on `[2, ∞)`, non-increasing in between.
pub fn chi(x: f64) -> f64 {
    if x <= 1.0 {
        return 1.0;
    }
    if x >= 2.0 {
        return 0.0;
    }
    let a = bump(2.0 - x);
    let b = bump(x - 1.0);
    a / (a + b)
}

/// `χ'(x)`, from the closed form of the quotient rule.
pub fn chi_prime(x: f64) -> f64 {
    if x <= 1.0 || x >= 2.0 {
        return 0.0;
    }
    let (p, q) = (2.0 - x, x - 1.0);
    let (a, b) = (bump(p), bump(q));
    // a' = -a/p², b' = b/q²
    let da = -a / (p * p);
    let db = b / (q * q);
    let s = a + b;
    (da * s - a * (da + db)) / (s * s)
}

impl ZoneConfig {
    pub fn new(n: f64) -> Self {
        assert!(n > 0.0 && n.is_finite(), "zone constant must be positive");
        ZoneConfig { n, source: ZoneConstantSource::User }
    }

    pub fn with_source(mut self, source: ZoneConstantSource) -> Self {
        self.source = source;
        self
    }

    /// Boundary `θ` with `(1+θ)|ξ| = N`, clamped at 0; `+∞` at `ξ = 0`.
    pub fn theta(&self, xi: f64) -> f64 {
        if xi == 0.0 {
            f64::INFINITY
        } else if xi >= self.n {
            0.0
        } else {
            self.n / xi - 1.0
        }
    }

    pub fn classify(&self, t: f64, xi: f64) -> ZoneLabel {
        if (1.0 + t) * xi <= self.n {
            ZoneLabel::Diss
        } else if xi <= self.n {
            ZoneLabel::HypSmall
        } else {
            ZoneLabel::HypLarge
        }
    }

    /// `(φ_diss, φ_hyp_small, φ_hyp_large)`, summing to one.
    pub fn cutoffs(&self, t: f64, xi: f64) -> (f64, f64, f64) {
        let outer = chi(xi / self.n);
        let inner = chi((1.0 + t) * xi / self.n);
        (outer * inner, outer * (1.0 - inner), 1.0 - outer)
    }

    /// `h(t, ξ) = (N/(1+t))·φ_diss + |ξ|·(φ_hyp_small + φ_hyp_large)`.
    pub fn micro_weight(&self, t: f64, xi: f64) -> f64 {
        let (d, s, l) = self.cutoffs(t, xi);
        self.n / (1.0 + t) * d + xi * (s + l)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chi_derivative_matches_difference_quotient() {
        for &x in &[1.1, 1.3, 1.5, 1.77, 1.95] {
            let h = 1e-6;
            let fd = (chi(x + h) - chi(x - h)) / (2.0 * h);
            assert!((fd - chi_prime(x)).abs() < 1e-8, "x={x}");
            assert!(chi_prime(x) <= 0.0);
        }
        assert_eq!(chi(1.5), 0.5);
    }

    #[test]
    fn spec_examples() {
        let z = ZoneConfig::new(1.0);
        assert_eq!(z.theta(1.0), 0.0);
        assert!((z.theta(0.1) - 9.0).abs() < 1e-14);
        assert!(z.theta(0.0).is_infinite());
        assert_eq!(z.classify(0.0, 2.0), ZoneLabel::HypLarge);
        assert_eq!(z.classify(100.0, 0.5), ZoneLabel::HypSmall);
        assert_eq!(z.classify(0.0, 0.5), ZoneLabel::Diss);
        assert_eq!(z.cutoffs(0.0, 0.5), (1.0, 0.0, 0.0));
        assert_eq!(z.cutoffs(3.0, 2.0), (0.0, 0.0, 1.0));
        assert_eq!(z.micro_weight(10.0, 0.05), 1.0 / 11.0);
        assert_eq!(z.micro_weight(10.0, 3.0), 3.0);
    }
}
