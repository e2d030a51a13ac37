//! Forward-mode dual numbers for exact Jacobians of small functions.
//!
//! `Dual<N>` carries a value plus N tangent components. Code written against
//! the [`Real`] trait runs on plain f64 or on duals, so one implementation of
//! forward kinematics yields both values and derivatives.

use std::ops::{Add, Div, Mul, Neg, Sub};

/// Scalar operations shared by f64 and dual numbers.
pub trait Real:
    Copy
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    fn from_f64(v: f64) -> Self;
    fn value(&self) -> f64;
    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn sqrt(self) -> Self;
}

impl Real for f64 {
    fn from_f64(v: f64) -> Self {
        v
    }
    fn value(&self) -> f64 {
        *self
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Dual<const N: usize> {
    pub re: f64,
    pub eps: [f64; N],
}

impl<const N: usize> Dual<N> {
    pub fn constant(v: f64) -> Self {
        Dual { re: v, eps: [0.0; N] }
    }

    /// Seeds the `i`-th independent variable.
    pub fn variable(v: f64, i: usize) -> Self {
        let mut eps = [0.0; N];
        eps[i] = 1.0;
        Dual { re: v, eps }
    }
}

impl<const N: usize> Add for Dual<N> {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(rhs.eps.iter()) {
            *e += r;
        }
        Dual { re: self.re + rhs.re, eps }
    }
}

impl<const N: usize> Sub for Dual<N> {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        let mut eps = self.eps;
        for (e, r) in eps.iter_mut().zip(rhs.eps.iter()) {
            *e -= r;
        }
        Dual { re: self.re - rhs.re, eps }
    }
}

impl<const N: usize> Mul for Dual<N> {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = self.eps[i] * rhs.re + self.re * rhs.eps[i];
        }
        Dual { re: self.re * rhs.re, eps }
    }
}

impl<const N: usize> Div for Dual<N> {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let inv = 1.0 / rhs.re;
        let mut eps = [0.0; N];
        for i in 0..N {
            eps[i] = (self.eps[i] - self.re * inv * rhs.eps[i]) * inv;
        }
        Dual { re: self.re * inv, eps }
    }
}

impl<const N: usize> Neg for Dual<N> {
    type Output = Self;
    fn neg(self) -> Self {
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e = -*e;
        }
        Dual { re: -self.re, eps }
    }
}

impl<const N: usize> Real for Dual<N> {
    fn from_f64(v: f64) -> Self {
        Dual::constant(v)
    }
    fn value(&self) -> f64 {
        self.re
    }
    fn sin(self) -> Self {
        let (s, c) = self.re.sin_cos();
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e *= c;
        }
        Dual { re: s, eps }
    }
    fn cos(self) -> Self {
        let (s, c) = self.re.sin_cos();
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e *= -s;
        }
        Dual { re: c, eps }
    }
    fn sqrt(self) -> Self {
        let root = self.re.sqrt();
        let scale = if root > 0.0 { 0.5 / root } else { 0.0 };
        let mut eps = self.eps;
        for e in eps.iter_mut() {
            *e *= scale;
        }
        Dual { re: root, eps }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual::<2>::variable(3.0, 0);
        let y = Dual::<2>::variable(4.0, 1);
        let f = x * y + x.sin();
        assert!((f.re - (12.0 + 3.0f64.sin())).abs() < 1e-12);
        assert!((f.eps[0] - (4.0 + 3.0f64.cos())).abs() < 1e-12);
        assert!((f.eps[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn quotient_and_sqrt() {
        let x = Dual::<1>::variable(2.0, 0);
        let f = (x * x + Dual::constant(1.0)).sqrt() / x;
        // f = sqrt(x^2+1)/x, f'(2) = (x/sqrt(x^2+1) * x - sqrt(x^2+1)) / x^2
        let v = (5.0f64).sqrt() / 2.0;
        let d = (2.0 / 5.0f64.sqrt() * 2.0 - 5.0f64.sqrt()) / 4.0;
        assert!((f.re - v).abs() < 1e-12);
        assert!((f.eps[0] - d).abs() < 1e-12);
    }
}
