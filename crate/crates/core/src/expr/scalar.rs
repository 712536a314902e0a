//! Scalar algebras that expressions can be evaluated over.
//!
//! `f64` is the plain real line. [`Dual<T>`] adjoins one nilpotent
//! infinitesimal to any scalar algebra, so `Dual<f64>` carries a first
//! directional derivative and `Dual<Dual<f64>>` carries a mixed second
//! derivative (hyper-dual numbers).

use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

pub trait Scalar:
    Copy
    + Debug
    + PartialEq
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Send
    + Sync
{
    /// Number of nested infinitesimal layers. Zero for plain reals.
    const ORDER: usize;

    fn from_f64(v: f64) -> Self;
    /// Real (standard) part.
    fn re(&self) -> f64;
    /// True when every infinitesimal component is exactly zero.
    fn is_real(&self) -> bool;

    fn sin(self) -> Self;
    fn cos(self) -> Self;
    fn exp(self) -> Self;
    fn ln(self) -> Self;
    fn sqrt(self) -> Self;
    fn abs(self) -> Self;
    fn powi(self, n: i32) -> Self;

    fn powf(self, e: Self) -> Self {
        (e * self.ln()).exp()
    }
}

impl Scalar for f64 {
    const ORDER: usize = 0;

    fn from_f64(v: f64) -> Self {
        v
    }
    fn re(&self) -> f64 {
        *self
    }
    fn is_real(&self) -> bool {
        true
    }
    fn sin(self) -> Self {
        f64::sin(self)
    }
    fn cos(self) -> Self {
        f64::cos(self)
    }
    fn exp(self) -> Self {
        f64::exp(self)
    }
    fn ln(self) -> Self {
        f64::ln(self)
    }
    fn sqrt(self) -> Self {
        f64::sqrt(self)
    }
    fn abs(self) -> Self {
        f64::abs(self)
    }
    fn powi(self, n: i32) -> Self {
        f64::powi(self, n)
    }
    fn powf(self, e: Self) -> Self {
        f64::powf(self, e)
    }
}

/// `re + eps·ε` with `ε² = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dual<T> {
    pub re: T,
    pub eps: T,
}

impl<T: Scalar> Dual<T> {
    pub fn new(re: T, eps: T) -> Self {
        Dual { re, eps }
    }

    pub fn constant(re: T) -> Self {
        Dual {
            re,
            eps: T::from_f64(0.0),
        }
    }
}

impl<T: Scalar> Add for Dual<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Dual::new(self.re + o.re, self.eps + o.eps)
    }
}

impl<T: Scalar> Sub for Dual<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Dual::new(self.re - o.re, self.eps - o.eps)
    }
}

impl<T: Scalar> Mul for Dual<T> {
    type Output = Self;
    fn mul(self, o: Self) -> Self {
        Dual::new(self.re * o.re, self.re * o.eps + self.eps * o.re)
    }
}

impl<T: Scalar> Div for Dual<T> {
    type Output = Self;
    fn div(self, o: Self) -> Self {
        let q = self.re / o.re;
        Dual::new(q, (self.eps - q * o.eps) / o.re)
    }
}

impl<T: Scalar> Neg for Dual<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Dual::new(-self.re, -self.eps)
    }
}

impl<T: Scalar> Scalar for Dual<T> {
    const ORDER: usize = T::ORDER + 1;

    fn from_f64(v: f64) -> Self {
        Dual::constant(T::from_f64(v))
    }
    fn re(&self) -> f64 {
        self.re.re()
    }
    fn is_real(&self) -> bool {
        self.re.is_real() && self.eps == T::from_f64(0.0)
    }
    fn sin(self) -> Self {
        Dual::new(self.re.sin(), self.eps * self.re.cos())
    }
    fn cos(self) -> Self {
        Dual::new(self.re.cos(), -(self.eps * self.re.sin()))
    }
    fn exp(self) -> Self {
        let e = self.re.exp();
        Dual::new(e, self.eps * e)
    }
    fn ln(self) -> Self {
        Dual::new(self.re.ln(), self.eps / self.re)
    }
    fn sqrt(self) -> Self {
        let s = self.re.sqrt();
        Dual::new(s, self.eps / (T::from_f64(2.0) * s))
    }
    fn abs(self) -> Self {
        if self.re() < 0.0 {
            -self
        } else {
            self
        }
    }
    fn powi(self, n: i32) -> Self {
        if n == 0 {
            return Dual::from_f64(1.0);
        }
        let lower = self.re.powi(n - 1);
        Dual::new(
            lower * self.re,
            self.eps * lower * T::from_f64(f64::from(n)),
        )
    }
}

/// First-order dual number over the reals.
pub type Dual1 = Dual<f64>;
/// Second-order (hyper-dual) number.
pub type Dual2 = Dual<Dual<f64>>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_rule() {
        let x = Dual1::new(3.0, 1.0);
        let y = x * x * x;
        assert_eq!(y.re, 27.0);
        assert_eq!(y.eps, 27.0);
    }

    #[test]
    fn hyper_dual_second_derivative() {
        // f(x) = x^3 at x = 2: f'' = 12
        let x = Dual2::new(Dual1::new(2.0, 1.0), Dual1::new(1.0, 0.0));
        let y = x.powi(3);
        assert_eq!(y.re.re, 8.0);
        assert_eq!(y.re.eps, 12.0);
        assert_eq!(y.eps.re, 12.0);
        assert_eq!(y.eps.eps, 12.0);
    }

    #[test]
    fn quotient_and_functions() {
        let x = Dual1::new(0.5, 1.0);
        let s = x.sin();
        assert!((s.eps - 0.5f64.cos()).abs() < 1e-15);
        let l = x.ln();
        assert!((l.eps - 2.0).abs() < 1e-15);
        let q = Dual1::from_f64(1.0) / x;
        assert!((q.eps + 4.0).abs() < 1e-15);
        let r = x.sqrt();
        assert!((r.eps - 0.5 / 0.5f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn order_and_reality() {
        assert_eq!(<f64 as Scalar>::ORDER, 0);
        assert_eq!(Dual1::ORDER, 1);
        assert_eq!(Dual2::ORDER, 2);
        assert!(Dual1::from_f64(2.0).is_real());
        assert!(!Dual1::new(2.0, 1.0).is_real());
    }
}
