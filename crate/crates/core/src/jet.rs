//! Truncated Taylor arithmetic.
//!
//! A [`Jet`] stores the normalized Taylor coefficients `c[k] = f^(k)(t0) s^k / k!`
//! of a function of one real variable around a base point, where `s` is an
//! optional scale of the expansion variable. Arithmetic propagates all
//! coefficients exactly (up to rounding), which gives forward-mode derivatives
//! of any order for closed-form expressions.

use num_complex::Complex64;
use std::ops::{Add, Mul, Neg, Sub};

pub type C64 = Complex64;

#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    c: Vec<C64>,
}

impl Jet {
    /// Constant function with `len` coefficients.
    pub fn constant(v: impl Into<C64>, len: usize) -> Self {
        let mut c = vec![C64::new(0.0, 0.0); len.max(1)];
        c[0] = v.into();
        Jet { c }
    }

    /// The independent variable `t = t0 + scale * s` expanded in `s`.
    pub fn variable(t0: f64, scale: f64, len: usize) -> Self {
        let mut j = Jet::constant(t0, len);
        if j.c.len() > 1 {
            j.c[1] = C64::new(scale, 0.0);
        }
        j
    }

    pub fn from_coeffs(c: Vec<C64>) -> Self {
        assert!(!c.is_empty(), "jet needs at least one coefficient");
        Jet { c }
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.c
    }

    pub fn value(&self) -> C64 {
        self.c[0]
    }

    /// `k`-th derivative with respect to the expansion variable `s`.
    pub fn derivative_s(&self, k: usize) -> C64 {
        if k >= self.c.len() {
            return C64::new(0.0, 0.0);
        }
        self.c[k] * factorial(k)
    }

    pub fn truncate(&self, len: usize) -> Jet {
        Jet { c: self.c[..len.min(self.c.len()).max(1)].to_vec() }
    }

    /// d/ds, dropping the highest coefficient.
    pub fn differentiate(&self) -> Jet {
        if self.c.len() == 1 {
            return Jet::constant(0.0, 1);
        }
        let c = (1..self.c.len()).map(|k| self.c[k] * k as f64).collect();
        Jet { c }
    }

    pub fn scale(&self, a: impl Into<C64>) -> Jet {
        let a = a.into();
        Jet { c: self.c.iter().map(|x| x * a).collect() }
    }

    pub fn add_scalar(&self, a: impl Into<C64>) -> Jet {
        let mut out = self.clone();
        out.c[0] += a.into();
        out
    }

    pub fn recip(&self) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut r = vec![C64::new(0.0, 0.0); n];
        r[0] = a0.inv();
        for k in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 1..=k {
                acc += self.c[i] * r[k - i];
            }
            r[k] = -acc * r[0];
        }
        Jet { c: r }
    }

    pub fn exp(&self) -> Jet {
        let n = self.c.len();
        let mut e = vec![C64::new(0.0, 0.0); n];
        e[0] = self.c[0].exp();
        for k in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 1..=k {
                acc += self.c[i] * e[k - i] * i as f64;
            }
            e[k] = acc / k as f64;
        }
        Jet { c: e }
    }

    pub fn ln(&self) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut l = vec![C64::new(0.0, 0.0); n];
        l[0] = a0.ln();
        for k in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 1..k {
                acc += l[i] * self.c[k - i] * i as f64;
            }
            l[k] = (self.c[k] - acc / k as f64) / a0;
        }
        Jet { c: l }
    }

    /// `self^p` for a real exponent; the base value must be nonzero.
    pub fn powf(&self, p: f64) -> Jet {
        let n = self.c.len();
        let a0 = self.c[0];
        let mut y = vec![C64::new(0.0, 0.0); n];
        y[0] = if a0.im == 0.0 && a0.re > 0.0 {
            C64::new(a0.re.powf(p), 0.0)
        } else {
            a0.powf(p)
        };
        for k in 1..n {
            let mut acc = C64::new(0.0, 0.0);
            for i in 1..=k {
                acc += self.c[i] * y[k - i] * ((p + 1.0) * i as f64 - k as f64);
            }
            y[k] = acc / (a0 * k as f64);
        }
        Jet { c: y }
    }
}

pub fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

fn zip_len(a: &Jet, b: &Jet) -> usize {
    a.c.len().min(b.c.len())
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, o: &Jet) -> Jet {
        let n = zip_len(self, o);
        Jet { c: (0..n).map(|k| self.c[k] + o.c[k]).collect() }
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, o: &Jet) -> Jet {
        let n = zip_len(self, o);
        Jet { c: (0..n).map(|k| self.c[k] - o.c[k]).collect() }
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, o: &Jet) -> Jet {
        let n = zip_len(self, o);
        let mut c = vec![C64::new(0.0, 0.0); n];
        for (k, ck) in c.iter_mut().enumerate() {
            for i in 0..=k {
                *ck += self.c[i] * o.c[k - i];
            }
        }
        Jet { c }
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Jet { c: self.c.iter().map(|x| -x).collect() }
    }
}

macro_rules! forward_owned {
    ($tr:ident, $m:ident) => {
        impl $tr for Jet {
            type Output = Jet;
            fn $m(self, o: Jet) -> Jet {
                (&self).$m(&o)
            }
        }
    };
}
forward_owned!(Add, add);
forward_owned!(Sub, sub);
forward_owned!(Mul, mul);

/// 2×2 matrix of jets, used by the diagonalization hierarchy.
#[derive(Clone, Debug)]
pub struct JetMat2 {
    pub e: [[Jet; 2]; 2],
}

impl JetMat2 {
    pub fn zeros(len: usize) -> Self {
        let z = Jet::constant(0.0, len);
        JetMat2 { e: [[z.clone(), z.clone()], [z.clone(), z]] }
    }

    pub fn identity(len: usize) -> Self {
        let mut m = Self::zeros(len);
        m.e[0][0] = Jet::constant(1.0, len);
        m.e[1][1] = Jet::constant(1.0, len);
        m
    }

    pub fn diag(a: Jet, b: Jet) -> Self {
        let len = a.len().min(b.len());
        let mut m = Self::zeros(len);
        m.e[0][0] = a;
        m.e[1][1] = b;
        m
    }

    pub fn constant(m: &nalgebra::Matrix2<C64>, len: usize) -> Self {
        JetMat2 {
            e: [
                [Jet::constant(m[(0, 0)], len), Jet::constant(m[(0, 1)], len)],
                [Jet::constant(m[(1, 0)], len), Jet::constant(m[(1, 1)], len)],
            ],
        }
    }

    pub fn len(&self) -> usize {
        self.e.iter().flatten().map(Jet::len).min().unwrap_or(1)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn value(&self) -> nalgebra::Matrix2<C64> {
        nalgebra::Matrix2::new(
            self.e[0][0].value(),
            self.e[0][1].value(),
            self.e[1][0].value(),
            self.e[1][1].value(),
        )
    }

    pub fn map(&self, f: impl Fn(&Jet) -> Jet) -> Self {
        JetMat2 {
            e: [
                [f(&self.e[0][0]), f(&self.e[0][1])],
                [f(&self.e[1][0]), f(&self.e[1][1])],
            ],
        }
    }

    pub fn differentiate(&self) -> Self {
        self.map(Jet::differentiate)
    }

    pub fn truncate(&self, len: usize) -> Self {
        self.map(|j| j.truncate(len))
    }

    pub fn scale(&self, a: C64) -> Self {
        self.map(|j| j.scale(a))
    }

    pub fn diagonal_part(&self) -> Self {
        let len = self.len();
        let mut d = Self::zeros(len);
        d.e[0][0] = self.e[0][0].truncate(len);
        d.e[1][1] = self.e[1][1].truncate(len);
        d
    }

    pub fn add(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] = &self.e[i][j] + &o.e[i][j];
            }
        }
        out
    }

    pub fn sub(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] = &self.e[i][j] - &o.e[i][j];
            }
        }
        out
    }

    pub fn mul(&self, o: &Self) -> Self {
        let mut out = self.clone();
        for i in 0..2 {
            for j in 0..2 {
                out.e[i][j] = &(&self.e[i][0] * &o.e[0][j]) + &(&self.e[i][1] * &o.e[1][j]);
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derivatives_of_composite_expression() {
        // f(t) = exp(t) / (1 + t)^2 at t = 0.7: compare against the closed form
        // f' = f (1 - 2/(1+t)), f'' = f ((1 - 2/(1+t))^2 + 2/(1+t)^2).
        let t0 = 0.7;
        let t = Jet::variable(t0, 1.0, 4);
        let f = &t.exp() * &t.add_scalar(1.0).powf(-2.0);
        let v = t0.exp() / (1.0 + t0).powi(2);
        let g = 1.0 - 2.0 / (1.0 + t0);
        assert!((f.derivative_s(0).re - v).abs() < 1e-14);
        assert!((f.derivative_s(1).re - v * g).abs() < 1e-13);
        let second = v * (g * g + 2.0 / (1.0 + t0).powi(2));
        assert!((f.derivative_s(2).re - second).abs() < 1e-12);
    }

    #[test]
    fn ln_and_recip_are_inverse_to_exp_and_mul() {
        let t = Jet::variable(1.3, 0.5, 6);
        let back = t.exp().ln();
        for (a, b) in back.coeffs().iter().zip(t.coeffs()) {
            assert!((a - b).norm() < 1e-13);
        }
        let one = &t * &t.recip();
        assert!((one.value() - 1.0).norm() < 1e-15);
        for c in &one.coeffs()[1..] {
            assert!(c.norm() < 1e-14);
        }
    }
}
