//! Piecewise Chebyshev–Lobatto collocation on a partition of an interval.
//!
//! Each panel carries `n + 1` Lobatto nodes including both endpoints. Values
//! sampled at the nodes can be integrated cumulatively with spectral accuracy
//! and interpolated barycentrically. The Picard, Duhamel and Peano–Baker
//! integrals of the asymptotic and diagonalization modules are built on this.

use num_complex::Complex64;

type C64 = Complex64;

#[derive(Clone, Debug)]
pub struct PanelGrid {
    pub breaks: Vec<f64>,
    pub degree: usize,
    reference: Vec<f64>,
    bary: Vec<f64>,
    /// `cumint[i][j]`: integral over `[-1, y_i]` of the `j`-th Lagrange basis polynomial.
    cumint: Vec<Vec<f64>>,
}

impl PanelGrid {
    pub fn new(breaks: Vec<f64>, degree: usize) -> Self {
        assert!(breaks.len() >= 2, "need at least one panel");
        assert!(breaks.windows(2).all(|w| w[1] > w[0]), "breaks must increase");
        assert!(degree >= 2);
        let n = degree;
        let reference: Vec<f64> = (0..=n).map(|j| -(std::f64::consts::PI * j as f64 / n as f64).cos()).collect();
        let bary: Vec<f64> = (0..=n)
            .map(|j| {
                let s = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n {
                    0.5 * s
                } else {
                    s
                }
            })
            .collect();
        let (gx, gw) = gauss_legendre(n + 1);
        let mut cumint = vec![vec![0.0; n + 1]; n + 1];
        for i in 1..=n {
            let hi = reference[i];
            let half = 0.5 * (hi + 1.0);
            let mid = 0.5 * (hi - 1.0);
            for (x, w) in gx.iter().zip(&gw) {
                let y = mid + half * x;
                let basis = lagrange_basis(&reference, &bary, y);
                for j in 0..=n {
                    cumint[i][j] += w * half * basis[j];
                }
            }
        }
        PanelGrid { breaks, degree, reference, bary, cumint }
    }

    /// Breaks of width at most `width(x)` evaluated at the left end of each panel,
    /// always including every point of `forced` that lies inside `[a, b]`.
    pub fn adaptive(a: f64, b: f64, degree: usize, forced: &[f64], width: impl Fn(f64) -> f64) -> Self {
        let mut stops: Vec<f64> = forced.iter().copied().filter(|&x| x > a && x < b).collect();
        stops.push(b);
        stops.sort_by(f64::total_cmp);
        let mut breaks = vec![a];
        let mut x = a;
        for stop in stops {
            while x < stop {
                let w = width(x).max(1e-12 * (1.0 + x.abs()));
                let remaining = stop - x;
                let next = if w >= remaining {
                    stop
                } else if w * 1.5 >= remaining {
                    x + 0.5 * remaining
                } else {
                    x + w
                };
                breaks.push(next);
                x = next;
            }
        }
        breaks.dedup();
        Self::new(breaks, degree)
    }

    pub fn panels(&self) -> usize {
        self.breaks.len() - 1
    }

    pub fn nodes_per_panel(&self) -> usize {
        self.degree + 1
    }

    pub fn start(&self) -> f64 {
        self.breaks[0]
    }

    pub fn end(&self) -> f64 {
        *self.breaks.last().unwrap()
    }

    /// Physical node coordinates of panel `p`.
    pub fn panel_nodes(&self, p: usize) -> Vec<f64> {
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        self.reference.iter().map(|y| 0.5 * (a + b) + 0.5 * (b - a) * y).collect()
    }

    /// All nodes, panel by panel (panel endpoints appear twice).
    pub fn nodes(&self) -> Vec<Vec<f64>> {
        (0..self.panels()).map(|p| self.panel_nodes(p)).collect()
    }

    /// Nodes of panel `p` with the endpoints pulled inside by a relative `1e-12`,
    /// so that coefficients with jumps at a break are sampled from the correct side.
    pub fn sampling_nodes(&self, p: usize) -> Vec<f64> {
        let mut xs = self.panel_nodes(p);
        let eps = 1e-12 * (self.breaks[p + 1] - self.breaks[p]).max(1e-300);
        let n = xs.len() - 1;
        xs[0] += eps;
        xs[n] -= eps;
        xs
    }

    /// Cumulative integral from the panel start to each node of panel `p`.
    pub fn panel_cumulative(&self, p: usize, values: &[C64]) -> Vec<C64> {
        let half = 0.5 * (self.breaks[p + 1] - self.breaks[p]);
        self.cumint
            .iter()
            .map(|row| row.iter().zip(values).map(|(w, v)| v * *w).sum::<C64>() * half)
            .collect()
    }

    /// Cumulative integral from the grid start, for values given per panel.
    pub fn cumulative(&self, values: &[Vec<C64>]) -> Vec<Vec<C64>> {
        let mut offset = C64::new(0.0, 0.0);
        let mut out = Vec::with_capacity(values.len());
        for (p, v) in values.iter().enumerate() {
            let mut c = self.panel_cumulative(p, v);
            for z in c.iter_mut() {
                *z += offset;
            }
            offset = *c.last().unwrap();
            out.push(c);
        }
        out
    }

    /// Integral over the full grid.
    pub fn total(&self, values: &[Vec<C64>]) -> C64 {
        (0..self.panels()).map(|p| *self.panel_cumulative(p, &values[p]).last().unwrap()).sum()
    }

    /// Locates the panel containing `x` (clamped to the grid).
    pub fn locate(&self, x: f64) -> usize {
        let p = self.breaks.partition_point(|&b| b <= x);
        p.saturating_sub(1).min(self.panels() - 1)
    }

    /// Barycentric interpolation of per-panel nodal values at `x`.
    pub fn interpolate(&self, values: &[Vec<C64>], x: f64) -> C64 {
        let p = self.locate(x);
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        let y = (2.0 * x - a - b) / (b - a);
        let basis = lagrange_basis(&self.reference, &self.bary, y);
        basis.iter().zip(&values[p]).map(|(w, v)| v * *w).sum()
    }

    /// Spectral derivative at the nodes of panel `p`.
    pub fn panel_derivative(&self, p: usize, values: &[C64]) -> Vec<C64> {
        let n = self.degree;
        let scale = 2.0 / (self.breaks[p + 1] - self.breaks[p]);
        let y = &self.reference;
        let w = &self.bary;
        let mut out = vec![C64::new(0.0, 0.0); n + 1];
        for i in 0..=n {
            let mut acc = C64::new(0.0, 0.0);
            for j in 0..=n {
                if i != j {
                    let d = (w[j] / w[i]) / (y[i] - y[j]);
                    acc += (values[j] - values[i]) * d;
                }
            }
            out[i] = acc * scale;
        }
        out
    }

    /// Interpolation weights at `x`: the panel index and the nodal weights.
    pub fn weights_at(&self, x: f64) -> (usize, Vec<f64>) {
        let p = self.locate(x);
        let (a, b) = (self.breaks[p], self.breaks[p + 1]);
        let y = (2.0 * x - a - b) / (b - a);
        (p, lagrange_basis(&self.reference, &self.bary, y))
    }
}

fn lagrange_basis(nodes: &[f64], bary: &[f64], y: f64) -> Vec<f64> {
    let mut out = vec![0.0; nodes.len()];
    for (j, &xj) in nodes.iter().enumerate() {
        if y == xj {
            out[j] = 1.0;
            return out;
        }
    }
    let mut denom = 0.0;
    for j in 0..nodes.len() {
        let w = bary[j] / (y - nodes[j]);
        out[j] = w;
        denom += w;
    }
    for v in out.iter_mut() {
        *v /= denom;
    }
    out
}

/// Gauss–Legendre nodes and weights on `[-1, 1]` by Newton iteration.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; m];
    let mut w = vec![0.0; m];
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=m {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            if m == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = m as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
    }
    (x, w)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        let (x, w) = gauss_legendre(6);
        let s: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(10)).sum();
        assert!((s - 2.0 / 11.0).abs() < 1e-14);
    }

    #[test]
    fn cumulative_integral_is_spectral() {
        let grid = PanelGrid::adaptive(0.0, 10.0, 16, &[], |_| 0.7);
        let vals: Vec<Vec<C64>> = grid.nodes().iter().map(|ns| ns.iter().map(|&x| C64::new(x.cos(), 0.0)).collect()).collect();
        let cum = grid.cumulative(&vals);
        for (ns, cs) in grid.nodes().iter().zip(&cum) {
            for (x, c) in ns.iter().zip(cs) {
                assert!((c.re - x.sin()).abs() < 1e-13);
            }
        }
        assert!((grid.interpolate(&vals, 3.3).re - 3.3f64.cos()).abs() < 1e-13);
        let d = grid.panel_derivative(2, &vals[2]);
        for (x, v) in grid.panel_nodes(2).iter().zip(&d) {
            assert!((v.re + x.sin()).abs() < 1e-11);
        }
    }
}
