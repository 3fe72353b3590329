//! Per-frequency first-order systems and the brute-force reference oracle.
//!
//! After a Fourier transform in space each mode `û(t, ξ)` solves
//! `û'' + b(t)û' + (|ξ|² + m(t))û = 0`. The oracle integrates the exact
//! first-order systems with an adaptive Dormand–Prince pair; everything in
//! the asymptotic and diagonalization modules is checked against it.

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::linalg::{c, flatten, op_norm, unflatten, C64, I, M2};
use crate::ode::{Dopri5, OdeStats};
use crate::zones::ZoneConfig;
use serde::{Deserialize, Serialize};

/// Which first-order system a [`ModalSystem`] integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SystemForm {
    /// `D_t U = Ã U` with `U = (N/(1+t)·û, D_t û)`.
    Dissipative,
    /// The same unknown as a Fuchs system `(1+t)∂_t U = (A + R)U`,
    /// integrated in the variable `ln(1+t)`.
    Fuchs,
    /// `D_t U = A U` with `U = (|ξ|û, D_t û)`.
    Hyperbolic,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    Oracle,
    Representation,
    Levinson,
}

/// A 2×2 propagator `E(t, s, ξ)`.
#[derive(Clone, Debug)]
pub struct FundamentalMatrix {
    pub entries: M2,
    pub s: f64,
    pub t: f64,
    pub xi: f64,
    pub provenance: Provenance,
}

impl FundamentalMatrix {
    pub fn norm(&self) -> f64 {
        op_norm(&self.entries)
    }
}

/// `U(t, ξ) = (h(t, ξ)û, D_t û)`.
#[derive(Clone, Copy, Debug)]
pub struct MicroEnergy {
    pub value: [C64; 2],
    pub t: f64,
    pub xi: f64,
}

impl MicroEnergy {
    pub fn norm(&self) -> f64 {
        (self.value[0].norm_sqr() + self.value[1].norm_sqr()).sqrt()
    }
}

/// Oracle output at a list of times, with the discrepancy against a rerun at
/// half the tolerance when requested.
#[derive(Clone, Debug)]
pub struct Propagation {
    pub times: Vec<f64>,
    pub matrices: Vec<M2>,
    pub stats: OdeStats,
    /// Largest relative difference to the halved-tolerance rerun at the checkpoints.
    pub crosscheck: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ModalSystem {
    pub model: CoefficientModel,
    pub zone: ZoneConfig,
    pub xi: f64,
    pub form: SystemForm,
}

pub const DEFAULT_TOL: f64 = 1e-10;

impl ModalSystem {
    pub fn new(model: CoefficientModel, zone: ZoneConfig, xi: f64, form: SystemForm) -> Self {
        assert!(xi >= 0.0, "frequency norm must be non-negative");
        ModalSystem { model, zone, xi, form }
    }

    /// The constant part `A` of the Fuchs form.
    pub fn fuchs_constant(&self) -> M2 {
        let n = self.zone.n;
        M2::new(c(-1.0), I * n, I * (self.model.m0 / n), c(-self.model.b0))
    }

    /// The remainder `R(t, ξ)` of the Fuchs form.
    pub fn fuchs_remainder(&self, t: f64) -> M2 {
        let n = self.zone.n;
        let tau = 1.0 + t;
        let low = I * ((tau * tau * self.xi * self.xi + self.model.m_deviation(t)) / n);
        M2::new(c(0.0), c(0.0), low, c(-self.model.b_deviation(t)))
    }

    /// The matrix of the selected form: `Ã` or the hyperbolic `A` for the
    /// `D_t` forms, `A + R` for the Fuchs form.
    pub fn system_matrix(&self, t: f64) -> M2 {
        let (b, m) = (self.model.b(t), self.model.m(t));
        let xi = self.xi;
        match self.form {
            SystemForm::Dissipative => {
                let n = self.zone.n;
                let tau = 1.0 + t;
                M2::new(I / tau, c(n / tau), c(tau * (xi * xi + m) / n), I * b)
            }
            SystemForm::Fuchs => self.fuchs_constant() + self.fuchs_remainder(t),
            SystemForm::Hyperbolic => {
                if xi == 0.0 {
                    panic!("the hyperbolic system is undefined at xi = 0");
                }
                M2::new(c(0.0), c(xi), c(xi + m / xi), I * b)
            }
        }
    }

    /// `G(t)` with `∂_t U = G U`.
    pub fn generator(&self, t: f64) -> M2 {
        match self.form {
            SystemForm::Fuchs => self.system_matrix(t) / c(1.0 + t),
            _ => self.system_matrix(t) * I,
        }
    }

    /// The weight multiplying `û` in the first component.
    pub fn weight(&self, t: f64) -> f64 {
        match self.form {
            SystemForm::Dissipative | SystemForm::Fuchs => self.zone.n / (1.0 + t),
            SystemForm::Hyperbolic => self.xi,
        }
    }

    fn ode(&self, tol: f64) -> Dopri5 {
        Dopri5::new(tol).with_xi(self.xi)
    }

    /// `E(t_i, s)` for every `t_i` in `times` (non-decreasing, all `≥ s`).
    pub fn propagate(&self, s: f64, times: &[f64], tol: f64) -> Result<Propagation> {
        if !(tol > 0.0) {
            return Err(Error::InvalidParameter("tolerance must be positive".into()));
        }
        if times.iter().any(|&t| t < s) || s < 0.0 {
            return Err(Error::InvalidParameter("propagation needs 0 <= s <= t".into()));
        }
        if self.form == SystemForm::Hyperbolic && self.xi == 0.0 {
            return Err(Error::InvalidParameter("the hyperbolic system needs xi > 0".into()));
        }
        let id = flatten(&M2::identity());
        let (raw, stats) = match self.form {
            SystemForm::Fuchs => {
                let xs: Vec<f64> = times.iter().map(|t| t.ln_1p()).collect();
                self.ode(tol).solve(
                    |x, y, dy| {
                        let t = x.exp_m1();
                        let g = self.system_matrix(t);
                        mat_rhs(&g, y, dy);
                    },
                    s.ln_1p(),
                    &id,
                    &xs,
                )?
            }
            _ => self.ode(tol).solve(
                |t, y, dy| {
                    let g = self.generator(t);
                    mat_rhs(&g, y, dy);
                },
                s,
                &id,
                times,
            )?,
        };
        Ok(Propagation { times: times.to_vec(), matrices: raw.iter().map(|v| unflatten(v)).collect(), stats, crosscheck: None })
    }

    /// As [`propagate`](Self::propagate), then reruns at `tol/2` and records the
    /// largest relative discrepancy over ten log-spaced checkpoints.
    pub fn propagate_checked(&self, s: f64, times: &[f64], tol: f64) -> Result<Propagation> {
        let mut main = self.propagate(s, times, tol)?;
        let Some(&last) = times.last() else {
            return Ok(main);
        };
        let checkpoints = log_checkpoints(s, last, 10);
        let fine = self.propagate(s, &checkpoints, tol / 2.0)?;
        let coarse = self.propagate(s, &checkpoints, tol)?;
        let worst = fine
            .matrices
            .iter()
            .zip(&coarse.matrices)
            .map(|(f, g)| crate::linalg::rel_diff(g, f))
            .fold(0.0, f64::max);
        main.crosscheck = Some(worst);
        Ok(main)
    }

    pub fn integrate_fundamental(&self, s: f64, t: f64, tol: f64) -> Result<FundamentalMatrix> {
        let p = self.propagate(s, &[t], tol)?;
        Ok(FundamentalMatrix { entries: p.matrices[0], s, t, xi: self.xi, provenance: Provenance::Oracle })
    }

    /// `‖E(t,r)E(r,s) − E(t,s)‖ / ‖E(t,s)‖`.
    pub fn check_cocycle(&self, s: f64, r: f64, t: f64, tol: f64) -> Result<f64> {
        if !(s <= r && r <= t) {
            return Err(Error::InvalidParameter("cocycle check needs s <= r <= t".into()));
        }
        let ts = self.integrate_fundamental(s, t, tol)?.entries;
        let rs = self.integrate_fundamental(s, r, tol)?.entries;
        let tr = self.integrate_fundamental(r, t, tol)?.entries;
        Ok(crate::linalg::rel_diff(&(tr * rs), &ts))
    }

    /// Micro-energy at time `t` from Cauchy data `(û₀, û₁)`, with the blended weight `h`.
    pub fn evolve_micro_energy(&self, u0: C64, u1: C64, t: f64, tol: f64) -> Result<MicroEnergy> {
        Ok(self.micro_energy_trace(u0, u1, &[t], tol)?[0])
    }

    pub fn micro_energy_trace(&self, u0: C64, u1: C64, times: &[f64], tol: f64) -> Result<Vec<MicroEnergy>> {
        let states = state_propagator(&self.model, self.xi, 0.0, times, tol)?;
        Ok(states
            .matrices
            .iter()
            .zip(times)
            .map(|(p, &t)| {
                let u = p[(0, 0)] * u0 + p[(0, 1)] * u1;
                let ut = p[(1, 0)] * u0 + p[(1, 1)] * u1;
                MicroEnergy { value: [u * self.zone.micro_weight(t, self.xi), -I * ut], t, xi: self.xi }
            })
            .collect())
    }

    /// Initial micro-energy `U(0) = (h(0, ξ)û₀, −i·û₁)`.
    pub fn initial_micro_energy(&self, u0: C64, u1: C64) -> [C64; 2] {
        [u0 * self.zone.micro_weight(0.0, self.xi), -I * u1]
    }
}

fn mat_rhs(g: &M2, y: &[C64], dy: &mut [C64]) {
    // row-major 2×2 product G·Y
    dy[0] = g[(0, 0)] * y[0] + g[(0, 1)] * y[2];
    dy[1] = g[(0, 0)] * y[1] + g[(0, 1)] * y[3];
    dy[2] = g[(1, 0)] * y[0] + g[(1, 1)] * y[2];
    dy[3] = g[(1, 0)] * y[1] + g[(1, 1)] * y[3];
}

/// Ten (or `count`) points spaced evenly in `ln(1+t)` over `(s, t]`.
pub fn log_checkpoints(s: f64, t: f64, count: usize) -> Vec<f64> {
    let (a, b) = (s.ln_1p(), t.ln_1p());
    (1..=count).map(|i| (a + (b - a) * i as f64 / count as f64).exp_m1()).collect()
}

/// Propagator of the unweighted state `(û, ∂_t û)`:
/// `y' = [[0, 1], [−(|ξ|² + m), −b]] y`.
pub fn state_propagator(model: &CoefficientModel, xi: f64, s: f64, times: &[f64], tol: f64) -> Result<Propagation> {
    let id = flatten(&M2::identity());
    let (raw, stats) = Dopri5::new(tol).with_xi(xi).solve(
        |t, y, dy| {
            let g = M2::new(c(0.0), c(1.0), c(-(xi * xi + model.m(t))), c(-model.b(t)));
            mat_rhs(&g, y, dy);
        },
        s,
        &id,
        times,
    )?;
    Ok(Propagation { times: times.to_vec(), matrices: raw.iter().map(|v| unflatten(v)).collect(), stats, crosscheck: None })
}

/// `(λ(s)/λ(t))²`, the modulus of the determinant of the state propagator.
pub fn liouville_ratio(model: &CoefficientModel, s: f64, t: f64) -> f64 {
    (2.0 * (model.log_lambda(s) - model.log_lambda(t))).exp()
}

/// Modulus of the determinant expected for a propagator of the given form:
/// the dissipative weight contributes an extra factor `(1+s)/(1+t)`.
pub fn expected_determinant(sys: &ModalSystem, s: f64, t: f64) -> f64 {
    let base = liouville_ratio(&sys.model, s, t);
    match sys.form {
        SystemForm::Hyperbolic => base,
        SystemForm::Dissipative | SystemForm::Fuchs => base * (1.0 + s) / (1.0 + t),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn free_wave_rotation() {
        let model = CoefficientModel::pure(0.0, 0.0);
        let p = state_propagator(&model, 1.0, 0.0, &[std::f64::consts::PI], 1e-12).unwrap();
        let e = p.matrices[0];
        assert!((e[(0, 0)] + 1.0).norm() < 1e-10);
        assert!(e[(0, 1)].norm() < 1e-10);
    }

    #[test]
    fn dissipative_and_fuchs_forms_agree() {
        let model = CoefficientModel::pure(3.0, 0.5);
        let zone = ZoneConfig::new(1.0);
        let d = ModalSystem::new(model.clone(), zone, 0.01, SystemForm::Dissipative);
        let f = ModalSystem::new(model, zone, 0.01, SystemForm::Fuchs);
        let a = d.integrate_fundamental(0.0, 50.0, 1e-12).unwrap().entries;
        let b = f.integrate_fundamental(0.0, 50.0, 1e-12).unwrap().entries;
        assert!(crate::linalg::rel_diff(&a, &b) < 1e-9);
        let det = a.determinant().norm();
        assert!((det / expected_determinant(&d, 0.0, 50.0) - 1.0).abs() < 1e-9);
    }
}
