//! WKB diagonalization in the hyperbolic zone.
//!
//! With `U = (|ξ|û, D_t û)` the modal equation reads `D_t U = A U`. The
//! constant matrix `M` diagonalizes the principal part: `V = M⁻¹U` solves
//! `D_t V = (D + B + C)V` with `D = diag(|ξ|, −|ξ|)`. Each further step
//! conjugates by `N_k = I + N⁽¹⁾ + … + N⁽ᵏ⁾` so that the non-diagonal
//! remainder gains one order of `(|ξ|(1+t))⁻¹`.
//!
//! Time derivatives inside the recursion are exact: the coefficients are
//! expanded as Taylor jets in `t` and the whole hierarchy is evaluated on jets.

use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::jet::{Jet, JetMat2};
use crate::linalg::{c, flatten, inverse, op_norm, unflatten, C64, I, M2};
use crate::modal::{FundamentalMatrix, ModalSystem, Provenance, SystemForm};
use crate::ode::Dopri5;
use crate::panels::PanelGrid;
use crate::zones::{ZoneConfig, ZoneConstantSource};
use serde::Serialize;
use std::sync::Arc;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

/// `M = (1/√2)[[1, −1], [1, 1]]`.
pub fn transform_matrix() -> M2 {
    M2::new(c(SQRT_HALF), c(-SQRT_HALF), c(SQRT_HALF), c(SQRT_HALF))
}

pub fn transform_matrix_inverse() -> M2 {
    M2::new(c(SQRT_HALF), c(SQRT_HALF), c(-SQRT_HALF), c(SQRT_HALF))
}

#[derive(Clone, Debug)]
pub struct PreliminaryTransform {
    pub d: M2,
    pub b: M2,
    pub c: M2,
    pub m: M2,
    pub m_inv: M2,
}

/// `D(ξ)`, `B(t)`, `C(t, ξ)` and `M` at time `t`.
pub fn preliminary_transform(model: &CoefficientModel, xi: f64, t: f64) -> Result<PreliminaryTransform> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter("the hyperbolic transform needs |xi| > 0".into()));
    }
    let hb = I * (model.b(t) / 2.0);
    let g = c(model.m(t) / (2.0 * xi));
    Ok(PreliminaryTransform {
        d: M2::new(c(xi), c(0.0), c(0.0), c(-xi)),
        b: M2::new(hb, hb, hb, hb),
        c: M2::new(g, -g, g, -g),
        m: transform_matrix(),
        m_inv: transform_matrix_inverse(),
    })
}

/// `E₀(t, s, ξ) = diag(e^{i(t−s)|ξ|}, e^{−i(t−s)|ξ|})`.
pub fn free_propagator(t: f64, s: f64, xi: f64) -> M2 {
    let p = (t - s) * xi;
    M2::new(C64::from_polar(1.0, p), c(0.0), c(0.0), C64::from_polar(1.0, -p))
}

type SymbolFn = Arc<dyn Fn(f64, f64) -> Result<M2> + Send + Sync>;

/// A matrix function of `(t, |ξ|)` with its claimed symbol orders `(m₁, m₂)`:
/// `‖D_t^j D_ξ^α X‖ ≲ |ξ|^{m₁−|α|}(1+t)^{−m₂−j}`.
#[derive(Clone)]
pub struct SymbolMatrix {
    pub name: String,
    pub order: (i32, i32),
    /// Number of `t`-derivatives available from the coefficient smoothness.
    pub smoothness: usize,
    eval: SymbolFn,
}

impl std::fmt::Debug for SymbolMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SymbolMatrix")
            .field("name", &self.name)
            .field("order", &self.order)
            .field("smoothness", &self.smoothness)
            .finish()
    }
}

impl SymbolMatrix {
    pub fn eval(&self, t: f64, xi: f64) -> Result<M2> {
        (self.eval)(t, xi)
    }
}

/// Jets of every piece of the hierarchy at one point.
#[derive(Clone, Debug)]
struct Hierarchy {
    n_parts: Vec<JetMat2>,
    f_parts: Vec<JetMat2>,
    n_total: JetMat2,
    f_total: JetMat2,
    b_k: JetMat2,
    /// `dt/ds` of the jet variable.
    scale: f64,
}

fn off_diagonal(a12: Jet, a21: Jet) -> JetMat2 {
    let len = a12.len().min(a21.len());
    let mut m = JetMat2::zeros(len);
    m.e[0][1] = a12.truncate(len);
    m.e[1][0] = a21.truncate(len);
    m
}

/// Builds `k` steps of the hierarchy on jets of `extra + 1` coefficients
/// for every output (value plus `extra` time derivatives).
fn hierarchy(model: &CoefficientModel, k: usize, t: f64, xi: f64, extra: usize) -> Result<Hierarchy> {
    if !(xi > 0.0) {
        return Err(Error::InvalidParameter("the hyperbolic transform needs |xi| > 0".into()));
    }
    let len = k + 1 + extra;
    let scale = 1.0 + t;
    let (bj, mj) = model.jets(t, scale, len)?;
    let hb = bj.scale(I * 0.5);
    let g = mj.scale(1.0 / (2.0 * xi));
    let bmat = JetMat2 { e: [[hb.clone(), hb.clone()], [hb.clone(), hb]] };
    let cmat = JetMat2 { e: [[g.clone(), g.scale(-1.0)], [g.clone(), g.scale(-1.0)]] };
    let bc = bmat.add(&cmat);
    let d = M2::new(c(xi), c(0.0), c(0.0), c(-xi));
    let dt_factor = -I / scale;

    // (D_t − D − B − C)N − N(D_t − D − F) = D_t N − [D, N] − (B + C)N + N F
    let residual = |n: &JetMat2, f: &JetMat2| -> JetMat2 {
        let dn = JetMat2::constant(&d, n.len());
        let commutator = dn.mul(n).sub(&n.mul(&dn));
        n.differentiate().scale(dt_factor).sub(&commutator).sub(&bc.mul(n)).add(&n.mul(f))
    };

    let inv2xi = 1.0 / (2.0 * xi);
    // First step: [D, N⁽¹⁾] + B = F⁽⁰⁾.
    let f0 = bmat.diagonal_part();
    let n1 = off_diagonal(bmat.e[0][1].scale(-inv2xi), bmat.e[1][0].scale(inv2xi));
    let mut n_parts = vec![n1.clone()];
    let mut f_parts = vec![f0.clone()];
    let mut n_total = JetMat2::identity(len).add(&n1);
    let mut f_total = f0;
    for _ in 2..=k {
        // The leading part of B⁽ʲ⁻¹⁾ must cancel against −[D, N⁽ʲ⁾] + F⁽ʲ⁻¹⁾.
        let prev = residual(&n_total, &f_total);
        let fj = prev.diagonal_part().scale(c(-1.0));
        let nj = off_diagonal(prev.e[0][1].scale(inv2xi), prev.e[1][0].scale(-inv2xi));
        n_total = n_total.add(&nj);
        f_total = f_total.add(&fj);
        n_parts.push(nj);
        f_parts.push(fj);
    }
    let b_k = residual(&n_total, &f_total);
    Ok(Hierarchy { n_parts, f_parts, n_total, f_total, b_k, scale })
}

/// Value and `t`-derivatives `d^j/dt^j` of a matrix jet.
fn time_derivatives(m: &JetMat2, scale: f64) -> Vec<M2> {
    (0..m.len())
        .map(|j| {
            let f = |x: &Jet| x.derivative_s(j) / scale.powi(j as i32);
            M2::new(f(&m.e[0][0]), f(&m.e[0][1]), f(&m.e[1][0]), f(&m.e[1][1]))
        })
        .collect()
}

/// The pieces of the `k`-th step evaluated at one point.
#[derive(Clone, Debug)]
pub struct StageValues {
    pub n_parts: Vec<M2>,
    pub f_parts: Vec<M2>,
    pub n_k: M2,
    pub f_k_minus_1: M2,
    pub b_k: M2,
    /// `R_k = −N_k⁻¹ B⁽ᵏ⁾`.
    pub r_k: M2,
}

/// The `k`-th diagonalization step as evaluable symbols.
#[derive(Clone, Debug)]
pub struct DiagonalizationStage {
    pub model: CoefficientModel,
    pub k: usize,
    pub zone: ZoneConfig,
    pub n_parts: Vec<SymbolMatrix>,
    pub f_parts: Vec<SymbolMatrix>,
    pub b_k: SymbolMatrix,
    /// Smallest sampled zone constant with `‖N_k − I‖ ≤ 1/2` on the hyperbolic zone.
    pub n_k_inverse_ok_from: f64,
    /// Largest operator-identity residual over the build-time samples.
    pub identity_residual: f64,
}

fn part_symbol(model: &CoefficientModel, k: usize, name: String, order: (i32, i32), smoothness: usize, pick: fn(&Hierarchy, usize) -> &JetMat2, idx: usize) -> SymbolMatrix {
    let model = model.clone();
    SymbolMatrix {
        name,
        order,
        smoothness,
        eval: Arc::new(move |t, xi| Ok(pick(&hierarchy(&model, k, t, xi, 0)?, idx).value())),
    }
}

/// Builds the first `k` steps and checks the operator identity at
/// deterministic sample points of the hyperbolic zone.
pub fn build_stage(model: &CoefficientModel, k: usize, zone: ZoneConfig) -> Result<DiagonalizationStage> {
    if k == 0 {
        return Err(Error::InvalidParameter("the diagonalization needs k >= 1".into()));
    }
    if k + 1 > model.ell {
        return Err(Error::UnsupportedOrder { requested: k, available: model.ell.saturating_sub(1) });
    }
    let ell = model.ell;
    let n_parts = (1..=k)
        .map(|j| part_symbol(model, k, format!("N^({j})"), (-(j as i32), j as i32), ell + 1 - j, |h, i| &h.n_parts[i], j - 1))
        .collect();
    let f_parts = (0..k)
        .map(|j| {
            let order = if j == 0 { (0, 1) } else { (-(j as i32), j as i32 + 1) };
            part_symbol(model, k, format!("F^({j})"), order, ell - j, |h, i| &h.f_parts[i], j)
        })
        .collect();
    let b_k = part_symbol(model, k, format!("B^({k})"), (-(k as i32), k as i32 + 1), ell - k, |h, _| &h.b_k, 0);
    let mut stage = DiagonalizationStage {
        model: model.clone(),
        k,
        zone,
        n_parts,
        f_parts,
        b_k,
        n_k_inverse_ok_from: f64::NAN,
        identity_residual: 0.0,
    };
    stage.n_k_inverse_ok_from = min_zone_constant(&stage)?;
    let mut worst: f64 = 0.0;
    for i in 0..12 {
        let t = 0.5 * 1.9f64.powi(i);
        let xi = (zone.n * (1.0 + 0.37 * i as f64)) / (1.0 + t);
        worst = worst.max(stage.operator_identity_residual(t, xi)?);
    }
    stage.identity_residual = worst;
    Ok(stage)
}

impl DiagonalizationStage {
    pub fn eval(&self, t: f64, xi: f64) -> Result<StageValues> {
        let h = hierarchy(&self.model, self.k, t, xi, 0)?;
        let n_k = h.n_total.value();
        let b_k = h.b_k.value();
        let inv = inverse(&n_k).ok_or_else(|| Error::ZoneConstant(format!("N_k is singular at t = {t}, |xi| = {xi}")))?;
        Ok(StageValues {
            n_parts: h.n_parts.iter().map(JetMat2::value).collect(),
            f_parts: h.f_parts.iter().map(JetMat2::value).collect(),
            n_k,
            f_k_minus_1: h.f_total.value(),
            b_k,
            r_k: -(inv * b_k),
        })
    }

    /// `N_k(t, ξ)`.
    pub fn n_k(&self, t: f64, xi: f64) -> Result<M2> {
        Ok(hierarchy(&self.model, self.k, t, xi, 0)?.n_total.value())
    }

    /// `‖(D_t − D − B − C)N_k − N_k(D_t − D − F_{k−1}) − B⁽ᵏ⁾‖` with `D_t N_k`
    /// from a five-point difference quotient, independent of the jets.
    pub fn operator_identity_residual(&self, t: f64, xi: f64) -> Result<f64> {
        let h = 1e-3 * (1.0 + t);
        let nk = |s: f64| self.n_k(s, xi);
        let deriv = (nk(t - 2.0 * h)? - nk(t + 2.0 * h)? + (nk(t + h)? - nk(t - h)?) * c(8.0)) / c(12.0 * h);
        let v = self.eval(t, xi)?;
        let p = preliminary_transform(&self.model, xi, t)?;
        let lhs = deriv * (-I) - (p.d * v.n_k - v.n_k * p.d) - (p.b + p.c) * v.n_k + v.n_k * v.f_k_minus_1;
        Ok(op_norm(&(lhs - v.b_k)))
    }

    /// `F_{k−1} − F₀ + R_k`, the generator of `Q_k` before conjugation by `E₀`.
    pub fn q_generator(&self, t: f64, xi: f64) -> Result<M2> {
        let v = self.eval(t, xi)?;
        Ok(v.f_k_minus_1 - v.f_parts[0] + v.r_k)
    }

    fn require_zone(&self, s: f64, xi: f64) -> Result<()> {
        if !(xi > 0.0) || (1.0 + s) * xi < self.zone.n * (1.0 - 1e-12) {
            return Err(Error::ZoneViolation {
                t: s,
                xi,
                detail: format!("the representation needs (1+s)|xi| >= N = {}", self.zone.n),
            });
        }
        Ok(())
    }

    /// Symbols with the stage's claimed orders: every `N⁽ʲ⁾`, `F⁽ʲ⁾` and `B⁽ᵏ⁾`.
    pub fn symbols(&self) -> Vec<&SymbolMatrix> {
        self.n_parts.iter().chain(&self.f_parts).chain(std::iter::once(&self.b_k)).collect()
    }
}

/// Smallest zone constant (to about 0.1% by bisection in `ln N`) such that
/// `‖N_k − I‖ ≤ 1/2` at every sample of the hyperbolic zone. Returns 0 when
/// `N_k = I` identically on the samples.
pub fn min_zone_constant(stage: &DiagonalizationStage) -> Result<f64> {
    let rhos: Vec<f64> = (0..16).map(|i| 10f64.powf(3.0 * i as f64 / 15.0)).collect();
    let mut times = vec![0.0];
    times.extend((0..25).map(|i| 10f64.powf(-2.0 + 8.0 * i as f64 / 24.0)));
    let worst = |n: f64| -> Result<f64> {
        let mut w: f64 = 0.0;
        for &t in &times {
            for &rho in &rhos {
                let xi = rho * n / (1.0 + t);
                let nk = hierarchy(&stage.model, stage.k, t, xi, 0)?.n_total.value();
                w = w.max(op_norm(&(nk - M2::identity())));
            }
        }
        Ok(w)
    };
    let (mut lo, mut hi) = (1e-4f64, 1e4f64);
    if worst(lo)? == 0.0 {
        return Ok(0.0);
    }
    if worst(lo)? <= 0.5 {
        return Ok(lo);
    }
    if worst(hi)? > 0.5 {
        return Err(Error::ZoneConstant(format!("‖N_k − I‖ exceeds 1/2 even for N = {hi}")));
    }
    while hi / lo > 1.001 {
        let mid = (lo * hi).sqrt();
        if worst(mid)? <= 0.5 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(hi)
}

/// The stage zone raised to the sampled invertibility constant when needed.
pub fn zone_for_stage(stage: &DiagonalizationStage) -> ZoneConfig {
    if stage.n_k_inverse_ok_from > stage.zone.n {
        ZoneConfig { n: stage.n_k_inverse_ok_from, source: ZoneConstantSource::Diagonalization }
    } else {
        stage.zone
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QPath {
    PeanoBaker,
    Ode,
}

/// `Q_k(t, s, ξ)` with the bookkeeping of how it was obtained.
#[derive(Clone, Debug)]
pub struct QPropagator {
    pub k: usize,
    pub s: f64,
    pub t: f64,
    pub xi: f64,
    pub value: M2,
    pub series_depth: usize,
    /// `C^{d+1}/(d+1)!·e^C`, bounding the dropped Peano–Baker terms.
    pub tail_bound: f64,
    /// `∫_s^t ‖F_{k−1} − F₀ + R_k‖ dτ`.
    pub c_total: f64,
    pub path: QPath,
}

impl QPropagator {
    /// The Liouville lower bound `exp(−2C)` for `|det Q_k|`.
    pub fn det_lower_bound(&self) -> f64 {
        (-2.0 * self.c_total).exp()
    }
}

pub const DEFAULT_DEPTH: usize = 8;

fn q_grid(s: f64, t: f64, xi: f64) -> PanelGrid {
    PanelGrid::adaptive(s, t, 16, &[], |x| (2.0 / xi).min(0.25 * (1.0 + x)))
}

/// `𝓡_k(τ, s) = E₀(s, τ)(F_{k−1} − F₀ + R_k)(τ)E₀(τ, s)`.
fn conjugated(x: &M2, tau: f64, s: f64, xi: f64) -> M2 {
    let ph = C64::from_polar(1.0, 2.0 * (tau - s) * xi);
    M2::new(x[(0, 0)], x[(0, 1)] / ph, x[(1, 0)] * ph, x[(1, 1)])
}

/// Evaluates `Q_k(t, s, ξ)` by the Peano–Baker series truncated after
/// `depth` terms when the factorial tail bound is below `tol`, and by
/// integrating `D_t Q = 𝓡 Q` otherwise.
pub fn q_propagator(stage: &DiagonalizationStage, s: f64, t: f64, xi: f64, depth: usize, tol: f64) -> Result<QPropagator> {
    stage.require_zone(s, xi)?;
    if t < s {
        return Err(Error::InvalidParameter("q_propagator needs t >= s".into()));
    }
    let mut out = QPropagator {
        k: stage.k,
        s,
        t,
        xi,
        value: M2::identity(),
        series_depth: depth,
        tail_bound: 0.0,
        c_total: 0.0,
        path: QPath::PeanoBaker,
    };
    if t == s {
        return Ok(out);
    }
    let grid = q_grid(s, t, xi);
    let mut gen = Vec::with_capacity(grid.panels());
    let mut norms = Vec::with_capacity(grid.panels());
    for nodes in grid.nodes() {
        let mut g = Vec::with_capacity(nodes.len());
        let mut nv = Vec::with_capacity(nodes.len());
        for &tau in &nodes {
            let x = stage.q_generator(tau, xi)?;
            nv.push(c(op_norm(&x)));
            g.push(conjugated(&x, tau, s, xi));
        }
        gen.push(g);
        norms.push(nv);
    }
    let c_total = grid.total(&norms).re;
    let mut fact = 1.0;
    for j in 1..=depth + 1 {
        fact *= j as f64;
    }
    let tail = c_total.powi(depth as i32 + 1) / fact * c_total.exp();
    out.c_total = c_total;
    out.tail_bound = tail;

    if tail <= tol {
        let mut term: Vec<Vec<M2>> = gen.iter().map(|p| vec![M2::identity(); p.len()]).collect();
        let mut sum = M2::identity();
        for _ in 0..depth {
            let mut entries: [Vec<Vec<C64>>; 4] = Default::default();
            for (p, gp) in gen.iter().enumerate() {
                let prod: Vec<M2> = gp.iter().zip(&term[p]).map(|(g, q)| g * q * I).collect();
                for (e, slot) in entries.iter_mut().enumerate() {
                    slot.push(prod.iter().map(|m| flatten(m)[e]).collect());
                }
            }
            let cum: Vec<Vec<Vec<C64>>> = entries.iter().map(|v| grid.cumulative(v)).collect();
            term = (0..grid.panels())
                .map(|p| (0..gen[p].len()).map(|i| unflatten(&[cum[0][p][i], cum[1][p][i], cum[2][p][i], cum[3][p][i]])).collect())
                .collect();
            sum += *term.last().unwrap().last().unwrap();
        }
        out.value = sum;
        return Ok(out);
    }

    out.path = QPath::Ode;
    out.value = q_ode(stage, s, s, M2::identity(), &[t], xi, tol)?[0];
    Ok(out)
}

/// Integrates `∂_t Q = i𝓡 Q` from `(t0, q0)` to each of `times`.
fn q_ode(stage: &DiagonalizationStage, s: f64, t0: f64, q0: M2, times: &[f64], xi: f64, tol: f64) -> Result<Vec<M2>> {
    let ode = Dopri5::new(tol.min(1e-8) * 0.1).with_xi(xi);
    let mut err = None;
    let (raw, _) = ode.solve(
        |tau, y, dy| {
            let x = match stage.q_generator(tau, xi) {
                Ok(x) => x,
                Err(e) => {
                    err.get_or_insert(e);
                    M2::zeros()
                }
            };
            let g = conjugated(&x, tau, s, xi) * I;
            let q = unflatten(y);
            dy.copy_from_slice(&flatten(&(g * q)));
        },
        t0,
        &flatten(&q0),
        times,
    )?;
    if let Some(e) = err {
        return Err(e);
    }
    Ok(raw.iter().map(|v| unflatten(v)).collect())
}

fn lambda_ratio(model: &CoefficientModel, s: f64, t: f64) -> f64 {
    (model.log_lambda(s) - model.log_lambda(t)).exp()
}

fn checked_inverse(m: &M2, t: f64, xi: f64) -> Result<M2> {
    if op_norm(&(m - M2::identity())) >= 1.0 {
        return Err(Error::ZoneConstant(format!("N_k is not safely invertible at t = {t}, |xi| = {xi}; raise N")));
    }
    inverse(m).ok_or_else(|| Error::ZoneConstant(format!("N_k is singular at t = {t}, |xi| = {xi}")))
}

/// Options for assembling representations.
#[derive(Clone, Copy, Debug)]
pub struct RepresentationOptions {
    pub depth: usize,
    pub tol: f64,
}

impl Default for RepresentationOptions {
    fn default() -> Self {
        RepresentationOptions { depth: DEFAULT_DEPTH, tol: 1e-10 }
    }
}

/// `E(t, s, ξ) = (λ(s)/λ(t))·M·N_k(t)·E₀(t, s)·Q_k(t, s)·N_k(s)⁻¹·M⁻¹`
/// for `(s, ξ)` in the hyperbolic zone, in the variables `(|ξ|û, D_t û)`.
pub fn assemble_representation(stage: &DiagonalizationStage, s: f64, t: f64, xi: f64, opts: RepresentationOptions) -> Result<(FundamentalMatrix, QPropagator)> {
    stage.require_zone(s, xi)?;
    let q = q_propagator(stage, s, t, xi, opts.depth, opts.tol)?;
    let nt = stage.n_k(t, xi)?;
    let ns_inv = checked_inverse(&stage.n_k(s, xi)?, s, xi)?;
    checked_inverse(&nt, t, xi)?;
    let e = transform_matrix() * nt * free_propagator(t, s, xi) * q.value * ns_inv * transform_matrix_inverse() * c(lambda_ratio(&stage.model, s, t));
    Ok((FundamentalMatrix { entries: e, s, t, xi, provenance: Provenance::Representation }, q))
}

/// The propagator from `0` to `t ≥ θ(|ξ|)` for `|ξ| ≤ N`: the hyperbolic
/// representation from the zone boundary composed with the oracle value of
/// the dissipative-zone propagator `E(θ, 0, ξ)`. The result maps
/// `(N û(0), D_t û(0))` to `(|ξ|û(t), D_t û(t))`; the two weights agree at `θ`.
pub fn assemble_from_boundary(stage: &DiagonalizationStage, t: f64, xi: f64, opts: RepresentationOptions) -> Result<FundamentalMatrix> {
    if !(xi > 0.0) || xi > stage.zone.n {
        return Err(Error::ZoneViolation { t, xi, detail: "the boundary representation needs 0 < |xi| <= N".into() });
    }
    let theta = stage.zone.theta(xi);
    if t < theta {
        return Err(Error::ZoneViolation { t, xi, detail: format!("t must be at least theta = {theta}") });
    }
    let diss = ModalSystem::new(stage.model.clone(), stage.zone, xi, SystemForm::Dissipative);
    let e_theta = diss.integrate_fundamental(0.0, theta, opts.tol.max(1e-13))?.entries;
    let (hyp, _) = assemble_representation(stage, theta, t, xi, opts)?;
    Ok(FundamentalMatrix { entries: hyp.entries * e_theta, s: 0.0, t, xi, provenance: Provenance::Representation })
}

/// `Q_k(∞, s, ξ)` with its convergence trace.
#[derive(Clone, Debug)]
pub struct QLimit {
    pub value: M2,
    /// `(t_j, ‖Q(t_j) − Q(t_{j−1})‖)` along the schedule.
    pub increments: Vec<(f64, f64)>,
    pub t_last: f64,
}

/// `Q_k(∞, s, ξ)`: integrates along `1 + t_j = (1+s)·growth^j` until the
/// geometric extrapolation of the remaining tail is below `tol`.
pub fn q_limit(stage: &DiagonalizationStage, s: f64, xi: f64, tol: f64, growth: f64, horizon: f64) -> Result<QLimit> {
    stage.require_zone(s, xi)?;
    if !(growth > 1.0) {
        return Err(Error::InvalidParameter("growth factor must exceed 1".into()));
    }
    let mut t = s;
    let mut q = M2::identity();
    let mut increments = Vec::new();
    let mut prev_inc: Option<f64> = None;
    let mut j = 1;
    loop {
        let next = (1.0 + s) * growth.powi(j) - 1.0;
        if next > horizon {
            let inc = increments.last().map(|x: &(f64, f64)| x.1).unwrap_or(f64::INFINITY);
            return Err(Error::Horizon { horizon, increment: inc });
        }
        let qn = q_ode(stage, s, t, q, &[next], xi, tol)?[0];
        let delta = qn - q;
        let inc = op_norm(&delta);
        increments.push((next, inc));
        if let Some(p) = prev_inc {
            let r = inc / p;
            if r < 1.0 && j >= 3 {
                let tail = r / (1.0 - r);
                if inc * (1.0 + tail) < tol {
                    return Ok(QLimit { value: qn + delta * c(tail), increments, t_last: next });
                }
            }
        }
        prev_inc = Some(inc);
        q = qn;
        t = next;
        j += 1;
    }
}

/// Sampled symbol estimate for one matrix.
#[derive(Clone, Debug, Serialize)]
pub struct SymbolAudit {
    pub name: String,
    pub order: (i32, i32),
    pub t_derivatives: usize,
    pub xi_derivatives: usize,
    pub samples: usize,
    /// Largest `‖D_t^j D_ξ^α X‖·|ξ|^{|α|−m₁}(1+t)^{m₂+j}` over the grid.
    pub worst_constant: f64,
    /// The same over the half of the grid farther from the zone boundary.
    pub inner_constant: f64,
}

/// Sample points `(1+t)|ξ| = ρN` of the hyperbolic zone.
#[derive(Clone, Debug, Serialize)]
pub struct AuditGrid {
    pub times: Vec<f64>,
    pub rhos: Vec<f64>,
}

impl Default for AuditGrid {
    fn default() -> Self {
        AuditGrid {
            times: (0..13).map(|i| 10f64.powf(-1.0 + 0.5 * i as f64)).collect(),
            rhos: (0..9).map(|i| 10f64.powf(0.375 * i as f64)).collect(),
        }
    }
}

/// Audits `N⁽ʲ⁾`, `F⁽ʲ⁾` and `B⁽ᵏ⁾` against their claimed orders, with exact
/// `t`-derivatives (up to the smoothness budget, at most 2) and central
/// differences in `|ξ|` for `|α| ≤ 2`.
pub fn audit_stage(stage: &DiagonalizationStage, grid: &AuditGrid) -> Result<Vec<SymbolAudit>> {
    let zone_n = zone_for_stage(stage).n;
    let extra = (stage.model.ell - stage.k).min(2);
    let k = stage.k;
    let symbols: Vec<(&SymbolMatrix, Box<dyn Fn(&Hierarchy) -> JetMat2>)> = stage
        .n_parts
        .iter()
        .enumerate()
        .map(|(i, s)| (s, Box::new(move |h: &Hierarchy| h.n_parts[i].clone()) as Box<dyn Fn(&Hierarchy) -> JetMat2>))
        .chain(stage.f_parts.iter().enumerate().map(|(i, s)| (s, Box::new(move |h: &Hierarchy| h.f_parts[i].clone()) as Box<dyn Fn(&Hierarchy) -> JetMat2>)))
        .chain(std::iter::once((&stage.b_k, Box::new(|h: &Hierarchy| h.b_k.clone()) as Box<dyn Fn(&Hierarchy) -> JetMat2>)))
        .collect();
    let mut audits: Vec<SymbolAudit> = symbols
        .iter()
        .map(|(s, _)| SymbolAudit {
            name: s.name.clone(),
            order: s.order,
            t_derivatives: extra.min(s.smoothness),
            xi_derivatives: 2,
            samples: 0,
            worst_constant: 0.0,
            inner_constant: 0.0,
        })
        .collect();
    let half_t = grid.times.len() / 2;
    let half_r = grid.rhos.len() / 2;
    for (ti, &t) in grid.times.iter().enumerate() {
        for (ri, &rho) in grid.rhos.iter().enumerate() {
            let xi = rho * zone_n / (1.0 + t);
            let dxi = 1e-3 * xi;
            let hs = [
                hierarchy(&stage.model, k, t, xi - dxi, extra)?,
                hierarchy(&stage.model, k, t, xi, extra)?,
                hierarchy(&stage.model, k, t, xi + dxi, extra)?,
            ];
            let inner = ti >= half_t || ri >= half_r;
            for ((sym, pick), audit) in symbols.iter().zip(audits.iter_mut()) {
                let ders: Vec<Vec<M2>> = hs.iter().map(|h| time_derivatives(&pick(h), h.scale)).collect();
                let (m1, m2) = (sym.order.0 as f64, sym.order.1 as f64);
                for j in 0..=audit.t_derivatives.min(ders[1].len() - 1) {
                    let vals = [ders[0][j], ders[1][j], ders[2][j]];
                    let xi_ders = [vals[1], (vals[2] - vals[0]) / c(2.0 * dxi), (vals[2] - vals[1] * c(2.0) + vals[0]) / c(dxi * dxi)];
                    for (a, d) in xi_ders.iter().enumerate() {
                        let weight = xi.powf(a as f64 - m1) * (1.0 + t).powf(m2 + j as f64);
                        let cst = op_norm(d) * weight;
                        audit.worst_constant = audit.worst_constant.max(cst);
                        if inner {
                            audit.inner_constant = audit.inner_constant.max(cst);
                        }
                    }
                }
                audit.samples += 1;
            }
        }
    }
    Ok(audits)
}

/// Sampled constants `max ‖∂_ξ^α X‖·|ξ|^{|α|}` for `|α| = 0, 1, 2` of
/// `X(ξ) = λ(θ(ξ))·E(θ(ξ), 0, ξ)` in the dissipative variables, with `θ` the
/// zone boundary. Differences are taken in `ln|ξ|`-uniform steps.
pub fn boundary_symbol_constants(model: &CoefficientModel, zone: ZoneConfig, xis: &[f64], tol: f64) -> Result<[f64; 3]> {
    let x_of = |xi: f64| -> Result<M2> {
        let sys = ModalSystem::new(model.clone(), zone, xi, SystemForm::Dissipative);
        let theta = zone.theta(xi);
        let e = sys.integrate_fundamental(0.0, theta, tol)?.entries;
        Ok(e * c(model.lambda(theta)))
    };
    let mut out = [0.0f64; 3];
    for &xi in xis {
        if !(xi > 0.0 && xi < zone.n) {
            return Err(Error::InvalidParameter("boundary samples need 0 < |xi| < N".into()));
        }
        let h = 1e-3 * xi;
        let (a, b, cc) = (x_of(xi - h)?, x_of(xi)?, x_of(xi + h)?);
        let d1 = (cc - a) / c(2.0 * h);
        let d2 = (cc - b * c(2.0) + a) / c(h * h);
        out[0] = out[0].max(op_norm(&b));
        out[1] = out[1].max(op_norm(&d1) * xi);
        out[2] = out[2].max(op_norm(&d2) * xi * xi);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// randomized check against the oracle

#[derive(Clone, Debug, Serialize)]
pub struct RepresentationSample {
    pub s: f64,
    pub t: f64,
    pub xi: f64,
    pub relative_error: f64,
    pub det_q: f64,
    pub det_bound: f64,
    pub c_total: f64,
    pub path: QPath,
    /// `‖E₀E₀* − I‖` for the free propagator between `s` and `t`.
    pub unitarity: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RepresentationCheck {
    pub k: usize,
    pub zone: ZoneConfig,
    pub samples: Vec<RepresentationSample>,
    pub max_error: f64,
    pub max_unitarity: f64,
    /// `|det Q_k| ≥ exp(−2·C_total)` at every sample.
    pub det_ok: bool,
}

/// Compares the assembled representation with the hyperbolic-form oracle at
/// `points` random `(s, t, ξ)` with `ξ ∈ [0.1, 10]` log-uniform, `(1+s)ξ ≥ N`
/// and `t − s ∈ [1, 200]`. The zone constant is raised to the stage minimum
/// when the requested one is smaller.
pub fn representation_check(model: &CoefficientModel, k: usize, zone: ZoneConfig, points: usize, seed: u64, opts: RepresentationOptions) -> Result<RepresentationCheck> {
    use rand::{Rng, SeedableRng};
    let zone = zone_for_stage(&build_stage(model, k, zone)?);
    let stage = build_stage(model, k, zone)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut samples = Vec::with_capacity(points);
    for _ in 0..points {
        let xi = 10f64.powf(rng.gen_range(-1.0..1.0));
        let s = (zone.n / xi - 1.0).max(0.0) + rng.gen_range(0.0..20.0);
        let t = s + rng.gen_range(1.0..200.0);
        let (e, q) = assemble_representation(&stage, s, t, xi, opts)?;
        let oracle = ModalSystem::new(model.clone(), zone, xi, SystemForm::Hyperbolic).integrate_fundamental(s, t, opts.tol.min(1e-12))?;
        let e0 = free_propagator(t, s, xi);
        samples.push(RepresentationSample {
            s,
            t,
            xi,
            relative_error: (e.entries - oracle.entries).norm() / oracle.entries.norm(),
            det_q: q.value.determinant().norm(),
            det_bound: q.det_lower_bound(),
            c_total: q.c_total,
            path: q.path,
            unitarity: (e0 * e0.adjoint() - M2::identity()).norm(),
        });
    }
    let max_error = samples.iter().map(|p| p.relative_error).fold(0.0, f64::max);
    let max_unitarity = samples.iter().map(|p| p.unitarity).fold(0.0, f64::max);
    let det_ok = samples.iter().all(|p| p.det_q >= p.det_bound);
    Ok(RepresentationCheck { k, zone, samples, max_error, max_unitarity, det_ok })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::rel_diff;

    #[test]
    fn transform_conjugates_the_hyperbolic_matrix() {
        let model = CoefficientModel::example_bounded();
        for &(t, xi) in &[(0.3, 2.0), (5.0, 0.7), (40.0, 0.05)] {
            let sys = ModalSystem::new(model.clone(), ZoneConfig::default(), xi, SystemForm::Hyperbolic);
            let p = preliminary_transform(&model, xi, t).unwrap();
            let conj = p.m_inv * sys.system_matrix(t) * p.m;
            assert!(op_norm(&(conj - p.d - p.b - p.c)) < 1e-12);
        }
        assert!(op_norm(&(transform_matrix() * transform_matrix_inverse() - M2::identity())) < 1e-15);
        assert!(preliminary_transform(&model, 0.0, 1.0).is_err());
    }

    #[test]
    fn first_step_and_recursion_cancel_orders() {
        let model = CoefficientModel::pure(2.0, 0.5);
        let stage = build_stage(&model, 2, ZoneConfig::default()).unwrap();
        let (t, xi) = (9.0, 0.5);
        let v = stage.eval(t, xi).unwrap();
        let a = I * (model.b(t) / (4.0 * xi));
        let expected = M2::new(c(0.0), -a, a, c(0.0));
        assert!(op_norm(&(v.n_parts[0] - expected)) < 1e-15);
        assert!(op_norm(&(v.f_parts[0] - M2::identity() * (I * model.b(t) / 2.0))) < 1e-15);
        assert!(stage.identity_residual < 1e-9, "{}", stage.identity_residual);
        // B⁽²⁾ ~ |ξ|⁻²(1+t)⁻³ to leading order: doubling 1+t and |ξ| divides by about 32.
        let b1 = op_norm(&v.b_k);
        let b2 = op_norm(&stage.eval(2.0 * (1.0 + t) - 1.0, 2.0 * xi).unwrap().b_k);
        assert!((b1 / b2 / 32.0 - 1.0).abs() < 0.01, "{}", b1 / b2);
    }

    #[test]
    fn free_case_is_trivial() {
        let model = CoefficientModel::pure(0.0, 0.0);
        let stage = build_stage(&model, 2, ZoneConfig::default()).unwrap();
        assert_eq!(stage.n_k_inverse_ok_from, 0.0);
        let (e, q) = assemble_representation(&stage, 0.0, 7.0, 1.5, RepresentationOptions::default()).unwrap();
        assert_eq!(q.value, M2::identity());
        let free = transform_matrix() * free_propagator(7.0, 0.0, 1.5) * transform_matrix_inverse();
        assert!(op_norm(&(e.entries - free)) < 1e-14);
    }

    #[test]
    fn scale_invariant_zone_constant() {
        let stage = build_stage(&CoefficientModel::pure(2.0, 0.0), 1, ZoneConfig::default()).unwrap();
        assert!((stage.n_k_inverse_ok_from - 1.0).abs() < 2e-3, "{}", stage.n_k_inverse_ok_from);
    }

    #[test]
    fn representation_matches_oracle() {
        let model = CoefficientModel::example_bounded();
        let stage = build_stage(&model, 2, ZoneConfig::new(2.0)).unwrap();
        let xi = 3.0;
        let (e, q) = assemble_representation(&stage, 0.0, 60.0, xi, RepresentationOptions::default()).unwrap();
        let sys = ModalSystem::new(model, stage.zone, xi, SystemForm::Hyperbolic);
        let oracle = sys.integrate_fundamental(0.0, 60.0, 1e-12).unwrap();
        assert_eq!(q.path, QPath::PeanoBaker);
        assert!(rel_diff(&e.entries, &oracle.entries) < 1e-8, "{}", rel_diff(&e.entries, &oracle.entries));
        assert!(q.value.determinant().norm() >= q.det_lower_bound());
    }
}
