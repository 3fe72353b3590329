//! Small complex matrix helpers shared across modules.

use nalgebra::{DMatrix, Matrix2};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type M2 = Matrix2<C64>;

pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn m2(a: C64, b: C64, c_: C64, d: C64) -> M2 {
    M2::new(a, b, c_, d)
}

pub fn identity() -> M2 {
    M2::identity()
}

/// Spectral norm of a 2×2 matrix from the closed form of the singular values.
pub fn op_norm(m: &M2) -> f64 {
    let f = m.iter().map(|z| z.norm_sqr()).sum::<f64>();
    let det = m.determinant().norm();
    let disc = (f * f - 4.0 * det * det).max(0.0);
    ((f + disc.sqrt()) / 2.0).sqrt()
}

/// Smallest singular value of a 2×2 matrix.
pub fn min_singular(m: &M2) -> f64 {
    let s = op_norm(m);
    if s == 0.0 {
        0.0
    } else {
        m.determinant().norm() / s
    }
}

pub fn inverse(m: &M2) -> Option<M2> {
    let det = m.determinant();
    if det.norm() == 0.0 || !det.is_finite() {
        return None;
    }
    Some(M2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)]) / det)
}

/// Spectral norm of a general complex matrix.
pub fn dop_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().singular_values().max()
}

pub fn flatten(m: &M2) -> [C64; 4] {
    [m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]]
}

pub fn unflatten(v: &[C64]) -> M2 {
    M2::new(v[0], v[1], v[2], v[3])
}

/// Relative distance `‖a − b‖ / ‖b‖` in the spectral norm.
pub fn rel_diff(a: &M2, b: &M2) -> f64 {
    let nb = op_norm(b);
    let d = op_norm(&(a - b));
    if nb == 0.0 {
        d
    } else {
        d / nb
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn op_norm_matches_svd() {
        let m = m2(C64::new(1.0, 2.0), c(-0.5), C64::new(0.0, 3.0), c(0.25));
        let d = DMatrix::from_row_slice(2, 2, &flatten(&m));
        assert!((op_norm(&m) - dop_norm(&d)).abs() < 1e-12);
        let inv = inverse(&m).unwrap();
        assert!((op_norm(&(m * inv - identity()))) < 1e-14);
        assert!((min_singular(&m) - 1.0 / op_norm(&inv)).abs() < 1e-12);
    }
}
