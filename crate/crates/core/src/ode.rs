//! Dormand–Prince 5(4) integrator with PI step-size control for complex
//! linear and nonlinear systems.

use crate::error::{Error, Result};
use num_complex::Complex64;

type C64 = Complex64;

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

const BETA: f64 = 0.04;
const SAFE: f64 = 0.9;
const FAC_MIN: f64 = 0.2;
const FAC_MAX: f64 = 10.0;

#[derive(Clone, Copy, Debug, Default)]
pub struct OdeStats {
    pub steps: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

#[derive(Clone, Copy, Debug)]
pub struct Dopri5 {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    /// Frequency attached to step-underflow diagnostics.
    pub xi: f64,
}

impl Dopri5 {
    pub fn new(rtol: f64) -> Self {
        Dopri5 { rtol, atol: 1e-300, max_steps: 50_000_000, xi: f64::NAN }
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    /// Integrates `y' = f(t, y)` from `t0` and returns the state at each of
    /// `outputs`, which must be monotone in the direction of integration.
    pub fn solve<F>(&self, mut f: F, t0: f64, y0: &[C64], outputs: &[f64]) -> Result<(Vec<Vec<C64>>, OdeStats)>
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let n = y0.len();
        let mut stats = OdeStats::default();
        let mut out = Vec::with_capacity(outputs.len());
        let Some(&t_end) = outputs.last() else {
            return Ok((out, stats));
        };
        let dir = if t_end >= t0 { 1.0 } else { -1.0 };
        for w in outputs.windows(2) {
            if (w[1] - w[0]) * dir < 0.0 {
                return Err(Error::InvalidParameter("output times must be monotone".into()));
            }
        }
        if (outputs[0] - t0) * dir < 0.0 {
            return Err(Error::InvalidParameter("output times precede the initial time".into()));
        }

        let mut y = y0.to_vec();
        let mut t = t0;
        let mut k1 = vec![C64::new(0.0, 0.0); n];
        let mut k2 = k1.clone();
        let mut k3 = k1.clone();
        let mut k4 = k1.clone();
        let mut k5 = k1.clone();
        let mut k6 = k1.clone();
        let mut k7 = k1.clone();
        let mut ytmp = k1.clone();
        let mut ynew = k1.clone();

        f(t, &y, &mut k1);
        stats.evaluations += 1;

        let mut h = self.initial_step(&mut f, t, &y, &k1, dir, (t_end - t0).abs(), &mut stats);
        let mut facold: f64 = 1e-4;
        let mut next = 0;
        while next < outputs.len() && (outputs[next] - t) * dir <= 0.0 {
            out.push(y.clone());
            next += 1;
        }

        while next < outputs.len() {
            let target = outputs[next];
            let mut last = false;
            let h_desired = h;
            if (t + h - target) * dir >= 0.0 {
                h = target - t;
                last = true;
            }
            if stats.steps + stats.rejected >= self.max_steps {
                return Err(Error::TooManySteps { t, max_steps: self.max_steps });
            }
            if h.abs() < 1e-14 * t.abs().max(1.0) && !last {
                return Err(Error::StepUnderflow { t, xi: self.xi });
            }

            for i in 0..n {
                ytmp[i] = y[i] + k1[i] * (h * A21);
            }
            f(t + C2 * h, &ytmp, &mut k2);
            for i in 0..n {
                ytmp[i] = y[i] + (k1[i] * A31 + k2[i] * A32) * h;
            }
            f(t + C3 * h, &ytmp, &mut k3);
            for i in 0..n {
                ytmp[i] = y[i] + (k1[i] * A41 + k2[i] * A42 + k3[i] * A43) * h;
            }
            f(t + C4 * h, &ytmp, &mut k4);
            for i in 0..n {
                ytmp[i] = y[i] + (k1[i] * A51 + k2[i] * A52 + k3[i] * A53 + k4[i] * A54) * h;
            }
            f(t + C5 * h, &ytmp, &mut k5);
            for i in 0..n {
                ytmp[i] = y[i] + (k1[i] * A61 + k2[i] * A62 + k3[i] * A63 + k4[i] * A64 + k5[i] * A65) * h;
            }
            let t_new = if last { target } else { t + h };
            f(t_new, &ytmp, &mut k6);
            for i in 0..n {
                ynew[i] = y[i] + (k1[i] * A71 + k3[i] * A73 + k4[i] * A74 + k5[i] * A75 + k6[i] * A76) * h;
            }
            f(t_new, &ynew, &mut k7);
            stats.evaluations += 6;

            let ymax = y.iter().chain(ynew.iter()).map(|z| z.norm()).fold(0.0, f64::max);
            let sc = self.atol + self.rtol * ymax;
            let mut err2 = 0.0;
            for i in 0..n {
                let e = (k1[i] * E1 + k3[i] * E3 + k4[i] * E4 + k5[i] * E5 + k6[i] * E6 + k7[i] * E7) * h;
                err2 += (e.norm() / sc).powi(2);
            }
            let err = (err2 / n as f64).sqrt();
            if !err.is_finite() {
                h *= 0.1;
                stats.rejected += 1;
                continue;
            }

            let expo1 = 0.2 - BETA * 0.75;
            let fac11 = err.powf(expo1);
            if err <= 1.0 {
                let fac = (fac11 / facold.powf(BETA) / SAFE).clamp(1.0 / FAC_MAX, 1.0 / FAC_MIN);
                facold = err.max(1e-4);
                stats.steps += 1;
                std::mem::swap(&mut y, &mut ynew);
                std::mem::swap(&mut k1, &mut k7);
                t = t_new;
                let h_prop = h / fac;
                while next < outputs.len() && (outputs[next] - t) * dir <= 0.0 {
                    out.push(y.clone());
                    next += 1;
                }
                h = if last { h_prop.abs().max(h_desired.abs()) * dir } else { h_prop };
            } else {
                stats.rejected += 1;
                h /= (fac11 / SAFE).min(1.0 / FAC_MIN);
            }
        }
        Ok((out, stats))
    }

    #[allow(clippy::too_many_arguments)]
    fn initial_step<F>(&self, f: &mut F, t: f64, y: &[C64], f0: &[C64], dir: f64, span: f64, stats: &mut OdeStats) -> f64
    where
        F: FnMut(f64, &[C64], &mut [C64]),
    {
        let ymax = y.iter().map(|z| z.norm()).fold(0.0, f64::max);
        let sc = self.atol + self.rtol * ymax;
        let norm = |v: &[C64]| (v.iter().map(|z| (z.norm() / sc).powi(2)).sum::<f64>() / v.len() as f64).sqrt();
        let d0 = norm(y);
        let d1 = norm(f0);
        let mut h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        h0 = h0.min(span.max(1e-12));
        let y1: Vec<C64> = y.iter().zip(f0).map(|(a, b)| a + b * (h0 * dir)).collect();
        let mut f1 = vec![C64::new(0.0, 0.0); y.len()];
        f(t + h0 * dir, &y1, &mut f1);
        stats.evaluations += 1;
        let diff: Vec<C64> = f1.iter().zip(f0).map(|(a, b)| a - b).collect();
        let d2 = norm(&diff) / h0;
        let dm = d1.max(d2);
        let h1 = if dm <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / dm).powf(0.2) };
        (100.0 * h0).min(h1).min(span.max(1e-12)) * dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn harmonic_oscillator_over_many_periods() {
        let ode = Dopri5::new(1e-11);
        let (ys, _) = ode
            .solve(
                |_t, y, dy| {
                    dy[0] = y[1];
                    dy[1] = -y[0];
                },
                0.0,
                &[C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                &[std::f64::consts::PI, 100.0],
            )
            .unwrap();
        assert!((ys[0][0].re + 1.0).abs() < 1e-9);
        assert!((ys[1][0].re - 100f64.cos()).abs() < 1e-8);
    }

    #[test]
    fn backward_integration() {
        let ode = Dopri5::new(1e-12);
        let (ys, _) = ode
            .solve(|_t, y, dy| dy[0] = y[0] * C64::new(0.0, 2.0), 1.0, &[C64::new(1.0, 0.0)], &[0.5, 0.0])
            .unwrap();
        let exact = C64::new(0.0, -2.0).exp();
        assert!((ys[1][0] - exact).norm() < 1e-10);
    }
}
