use std::ops::{Add, Mul, Neg, Sub};

use crate::error::{Error, Result};
use crate::series::{self, Elementary, Series, C64, ZERO};

/// Truncated Taylor expansion of a function of one variable.
///
/// `coeffs[k]` holds `f^(k)(center) / k!` for `k = 0..=order`.
#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    center: f64,
    coeffs: Vec<C64>,
}

impl Jet {
    pub fn new(center: f64, coeffs: Vec<C64>) -> Self {
        assert!(!coeffs.is_empty(), "a jet needs at least one coefficient");
        Jet { center, coeffs }
    }

    pub fn constant(center: f64, order: usize, c: C64) -> Self {
        let mut coeffs = vec![ZERO; order + 1];
        coeffs[0] = c;
        Jet { center, coeffs }
    }

    /// The identity function `t ↦ t` expanded at `center`.
    pub fn variable(center: f64, order: usize) -> Self {
        let mut j = Jet::constant(center, order, C64::new(center, 0.0));
        if order >= 1 {
            j.coeffs[1] = C64::new(1.0, 0.0);
        }
        j
    }

    pub fn center(&self) -> f64 {
        self.center
    }

    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeff(&self, k: usize) -> C64 {
        self.coeffs.get(k).copied().unwrap_or(ZERO)
    }

    /// The k-th derivative at the centre, `k! * coeffs[k]`.
    pub fn deriv(&self, k: usize) -> Result<C64> {
        if k > self.order() {
            return Err(Error::OrderExceeded {
                k,
                order: self.order(),
            });
        }
        Ok(self.coeffs[k] * factorial(k))
    }

    pub fn truncate(&self, order: usize) -> Jet {
        let n = (order + 1).min(self.coeffs.len());
        Jet::new(self.center, self.coeffs[..n].to_vec())
    }

    /// Evaluates the truncated polynomial at `center + h`.
    pub fn eval_at(&self, h: C64) -> C64 {
        self.coeffs.iter().rev().fold(ZERO, |acc, &c| acc * h + c)
    }

    fn map(&self, f: Elementary) -> Result<Jet> {
        Ok(Jet::new(self.center, f.apply(&self.coeffs)?))
    }

    fn zip(&self, other: &Jet, f: impl Fn(C64, C64) -> C64) -> Jet {
        let n = self.coeffs.len().min(other.coeffs.len());
        let coeffs = (0..n).map(|k| f(self.coeffs[k], other.coeffs[k])).collect();
        Jet::new(self.center, coeffs)
    }
}

pub(crate) fn factorial(k: usize) -> f64 {
    (1..=k).fold(1.0, |acc, i| acc * i as f64)
}

impl Series for Jet {
    fn lift(&self, c: C64) -> Self {
        Jet::constant(self.center, self.order(), c)
    }
    fn value(&self) -> C64 {
        self.coeffs[0]
    }
    fn add(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a + b)
    }
    fn sub(&self, other: &Self) -> Self {
        self.zip(other, |a, b| a - b)
    }
    fn mul(&self, other: &Self) -> Self {
        Jet::new(self.center, series::mul(&self.coeffs, &other.coeffs))
    }
    fn neg(&self) -> Self {
        Jet::new(self.center, self.coeffs.iter().map(|c| -c).collect())
    }
    fn scale(&self, c: C64) -> Self {
        Jet::new(self.center, self.coeffs.iter().map(|x| x * c).collect())
    }
    fn conj(&self) -> Self {
        Jet::new(self.center, self.coeffs.iter().map(|x| x.conj()).collect())
    }
    fn div(&self, other: &Self) -> Result<Self> {
        Ok(Jet::new(self.center, series::div(&self.coeffs, &other.coeffs)?))
    }
    fn exp(&self) -> Self {
        Jet::new(self.center, series::exp(&self.coeffs))
    }
    fn ln(&self) -> Result<Self> {
        self.map(Elementary::Ln)
    }
    fn powf(&self, p: f64) -> Result<Self> {
        self.map(Elementary::Pow(p))
    }
    fn sin(&self) -> Self {
        Jet::new(self.center, series::sin_cos(&self.coeffs).0)
    }
    fn cos(&self) -> Self {
        Jet::new(self.center, series::sin_cos(&self.coeffs).1)
    }
    fn bump(&self) -> Result<Self> {
        self.map(Elementary::Bump)
    }
}

impl Add for &Jet {
    type Output = Jet;
    fn add(self, rhs: &Jet) -> Jet {
        Series::add(self, rhs)
    }
}

impl Sub for &Jet {
    type Output = Jet;
    fn sub(self, rhs: &Jet) -> Jet {
        Series::sub(self, rhs)
    }
}

impl Mul for &Jet {
    type Output = Jet;
    fn mul(self, rhs: &Jet) -> Jet {
        Series::mul(self, rhs)
    }
}

impl Neg for &Jet {
    type Output = Jet;
    fn neg(self) -> Jet {
        Series::neg(self)
    }
}
