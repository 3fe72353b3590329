//! Spectral solver on the periodic box `[0, L)ⁿ`.
//!
//! The field is `u(x) = L⁻ⁿ Σ_k û(k) e^{ik·x}` with `k ∈ (2π/L)ℤⁿ`, the box
//! analogue of `(2π)⁻ⁿ∫ û(ξ) e^{ix·ξ} dξ`, so physical `L²` norms approximate the
//! full-space ones. Frequencies sharing `|k|` share one oracle run.

use super::config::BoxGrid;
use crate::coeffs::CoefficientModel;
use crate::error::{Error, Result};
use crate::estimates::{evolve_frequency, DataProfile};
use crate::linalg::C64;
use crate::zones::ZoneConfig;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::Serialize;
use std::collections::BTreeMap;

/// Largest number of grid points accepted.
pub const MAX_POINTS: usize = 1 << 22;

#[derive(Clone, Debug, Serialize)]
pub struct BoxTrace {
    pub times: Vec<f64>,
    /// `‖((1+t)⁻¹u, ∇u, u_t)‖` from the physical-space fields.
    pub values: Vec<f64>,
    /// `‖(1+t)⁻¹u‖`, `‖∇u‖`, `‖u_t‖`.
    pub components: [Vec<f64>; 3],
    pub u_norm: Vec<f64>,
    /// Relative error of the inverse-then-forward transform of the initial data.
    pub roundtrip_error: f64,
    /// Distinct `|k|` evolved (the rest carry no data).
    pub active_shells: usize,
    pub warnings: Vec<String>,
}

/// In-place `n`-dimensional transform of a row-major cube with side `side`
/// (unnormalized in both directions).
pub fn fft_nd(data: &mut [C64], side: usize, dim: usize, inverse: bool, planner: &mut FftPlanner<f64>) {
    assert_eq!(data.len(), side.pow(dim as u32));
    let fft = if inverse { planner.plan_fft_inverse(side) } else { planner.plan_fft_forward(side) };
    let mut line = vec![C64::new(0.0, 0.0); side];
    for axis in 0..dim {
        let stride = side.pow((dim - 1 - axis) as u32);
        for start in 0..data.len() {
            if (start / stride) % side != 0 {
                continue;
            }
            for (i, v) in line.iter_mut().enumerate() {
                *v = data[start + i * stride];
            }
            fft.process(&mut line);
            for (i, v) in line.iter().enumerate() {
                data[start + i * stride] = *v;
            }
        }
    }
}

/// Signed integer wave numbers of each flat index, per axis.
fn wave_indices(side: usize, dim: usize) -> Vec<Vec<i64>> {
    let signed = |i: usize| if i < side / 2 { i as i64 } else { i as i64 - side as i64 };
    (0..side.pow(dim as u32))
        .map(|flat| {
            let mut rest = flat;
            let mut out = vec![0i64; dim];
            for a in (0..dim).rev() {
                out[a] = signed(rest % side);
                rest /= side;
            }
            out
        })
        .collect()
}

/// The grid-resolution condition `2π/L ≤ N/(1+t_final)`.
pub fn resolution_warning(grid: &BoxGrid, zone: ZoneConfig, t_final: f64) -> Option<String> {
    let dk = grid.spacing();
    let need = zone.n / (1.0 + t_final);
    (dk > need).then(|| {
        format!("frequency spacing {dk:.3e} does not resolve the dissipative zone at t = {t_final:.3e} (needs <= {need:.3e}); low-frequency truncation error is uncontrolled")
    })
}

fn physical_norm(field: &[C64], cell: f64) -> f64 {
    (field.iter().map(|z| z.norm_sqr()).sum::<f64>() * cell).sqrt()
}

/// Evolves radial data on the box and measures the fields in physical space.
/// A resolution warning becomes an error under `strict`.
pub fn simulate_box(model: &CoefficientModel, zone: ZoneConfig, data: &DataProfile, grid: &BoxGrid, times: &[f64], tol: f64, strict: bool) -> Result<BoxTrace> {
    grid.validate()?;
    let (side, dim) = (grid.points_per_dim, grid.dim);
    let total = side.checked_pow(dim as u32).filter(|&t| t <= MAX_POINTS).ok_or_else(|| Error::Config(format!("{side}^{dim} grid points exceed the limit {MAX_POINTS}")))?;
    let t_final = times.iter().copied().fold(0.0, f64::max);
    let mut warnings = Vec::new();
    if let Some(w) = resolution_warning(grid, zone, t_final) {
        if strict {
            return Err(Error::Resolution(w));
        }
        warnings.push(w);
    }
    let dk = grid.spacing();
    let scale = grid.box_length.powi(dim as i32);
    let cell = (grid.box_length / side as f64).powi(dim as i32);
    let waves = wave_indices(side, dim);
    let radius2: Vec<i64> = waves.iter().map(|w| w.iter().map(|m| m * m).sum()).collect();

    // physical data from the spectral profile, then back through the forward transform
    let mut planner = FftPlanner::new();
    let spectral = |f: fn(&(C64, C64)) -> C64| -> Vec<C64> { radius2.iter().map(|&r2| f(&data.sample(dk * (r2 as f64).sqrt()))).collect() };
    let (hat0, hat1) = (spectral(|p| p.0), spectral(|p| p.1));
    let mut coeffs = Vec::with_capacity(2);
    let mut roundtrip: f64 = 0.0;
    for hat in [&hat0, &hat1] {
        let mut phys = hat.clone();
        fft_nd(&mut phys, side, dim, true, &mut planner);
        let mut back = phys;
        fft_nd(&mut back, side, dim, false, &mut planner);
        let back: Vec<C64> = back.iter().map(|z| z / total as f64).collect();
        let norm = hat.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 0.0 {
            let diff = hat.iter().zip(&back).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            roundtrip = roundtrip.max(diff / norm);
        }
        coeffs.push(back);
    }
    let (u0, u1) = (&coeffs[0], &coeffs[1]);

    // one oracle run per shell |k| that carries data
    let peak = u0.iter().chain(u1.iter()).map(|z| z.norm()).fold(0.0, f64::max);
    let mut shells: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
    for (i, &r2) in radius2.iter().enumerate() {
        if u0[i].norm() > 1e-15 * peak || u1[i].norm() > 1e-15 * peak {
            shells.entry(r2).or_default().push(i);
        }
    }
    let unit_runs: Vec<(i64, Vec<[C64; 4]>)> = shells
        .keys()
        .copied()
        .collect::<Vec<_>>()
        .par_iter()
        .map(|&r2| {
            let k = dk * (r2 as f64).sqrt();
            let a = evolve_frequency(model, k, C64::new(1.0, 0.0), C64::new(0.0, 0.0), times, tol)?;
            let b = evolve_frequency(model, k, C64::new(0.0, 0.0), C64::new(1.0, 0.0), times, tol)?;
            Ok((r2, a.iter().zip(&b).map(|(x, y)| [x.0, y.0, x.1, y.1]).collect()))
        })
        .collect::<Result<_>>()?;
    let runs: BTreeMap<i64, Vec<[C64; 4]>> = unit_runs.into_iter().collect();

    let nt = times.len();
    let mut comps = [vec![0.0; nt], vec![0.0; nt], vec![0.0; nt]];
    let mut u_norm = vec![0.0; nt];
    for (j, &t) in times.iter().enumerate() {
        let mut hat_u = vec![C64::new(0.0, 0.0); total];
        let mut hat_ut = vec![C64::new(0.0, 0.0); total];
        for (r2, idx) in &shells {
            let p = runs[r2][j];
            for &i in idx {
                hat_u[i] = p[0] * u0[i] + p[1] * u1[i];
                hat_ut[i] = p[2] * u0[i] + p[3] * u1[i];
            }
        }
        let to_physical = |mut hat: Vec<C64>, planner: &mut FftPlanner<f64>| {
            fft_nd(&mut hat, side, dim, true, planner);
            hat.iter().map(|z| z / scale).collect::<Vec<C64>>()
        };
        let mut grad2 = 0.0;
        for a in 0..dim {
            let g: Vec<C64> = hat_u.iter().zip(&waves).map(|(z, w)| z * C64::new(0.0, dk * w[a] as f64)).collect();
            grad2 += physical_norm(&to_physical(g, &mut planner), cell).powi(2);
        }
        let un = physical_norm(&to_physical(hat_u, &mut planner), cell);
        let utn = physical_norm(&to_physical(hat_ut, &mut planner), cell);
        comps[0][j] = un / (1.0 + t);
        comps[1][j] = grad2.sqrt();
        comps[2][j] = utn;
        u_norm[j] = un;
    }
    let values = (0..nt).map(|j| (comps[0][j].powi(2) + comps[1][j].powi(2) + comps[2][j].powi(2)).sqrt()).collect();
    Ok(BoxTrace { times: times.to_vec(), values, components: comps, u_norm, roundtrip_error: roundtrip, active_shells: shells.len(), warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transform_roundtrip_is_identity() {
        let mut planner = FftPlanner::new();
        for (side, dim) in [(64usize, 1usize), (16, 2), (8, 3)] {
            let orig: Vec<C64> = (0..side.pow(dim as u32)).map(|i| C64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
            let mut v = orig.clone();
            fft_nd(&mut v, side, dim, true, &mut planner);
            fft_nd(&mut v, side, dim, false, &mut planner);
            let n = v.len() as f64;
            let err = orig.iter().zip(&v).map(|(a, b)| (a - b / n).norm()).fold(0.0, f64::max);
            assert!(err < 1e-12, "{side}^{dim}: {err}");
        }
    }

    #[test]
    fn free_energy_is_conserved() {
        let grid = BoxGrid { dim: 1, points_per_dim: 512, box_length: 200.0 };
        let times = [0.0, 1.0, 10.0, 50.0];
        let tr = simulate_box(&CoefficientModel::pure(0.0, 0.0), ZoneConfig::default(), &DataProfile::ring(1.0, 0.5), &grid, &times, 1e-10, false).unwrap();
        let e: Vec<f64> = (0..4).map(|j| tr.components[1][j].powi(2) + tr.components[2][j].powi(2)).collect();
        for v in &e {
            assert!((v - e[0]).abs() <= 1e-8 * e[0], "{e:?}");
        }
    }

    #[test]
    fn zero_data_stays_zero() {
        let grid = BoxGrid { dim: 2, points_per_dim: 16, box_length: 50.0 };
        let tr = simulate_box(&CoefficientModel::example_bounded(), ZoneConfig::default(), &DataProfile::ring(1.0, 0.5).scaled(0.0), &grid, &[0.0, 5.0], 1e-10, false).unwrap();
        assert!(tr.values.iter().all(|&v| v == 0.0));
        assert_eq!(tr.active_shells, 0);
    }

    #[test]
    fn strict_mode_rejects_coarse_boxes() {
        let grid = BoxGrid { dim: 1, points_per_dim: 64, box_length: 10.0 };
        let data = DataProfile::ring(1.0, 0.5);
        let r = simulate_box(&CoefficientModel::pure(1.0, 1.0), ZoneConfig::default(), &data, &grid, &[0.0, 100.0], 1e-8, true);
        assert!(matches!(r, Err(Error::Resolution(_))));
        let r = simulate_box(&CoefficientModel::pure(1.0, 1.0), ZoneConfig::default(), &data, &grid, &[0.0, 100.0], 1e-8, false).unwrap();
        assert_eq!(r.warnings.len(), 1);
    }
}
