//! Truncated power-series arithmetic shared by [`Jet`](crate::Jet) and
//! [`MJet`](crate::MJet), plus the [`Series`] abstraction the expression
//! evaluator is generic over.
//!
//! Coefficients are stored in Taylor form, `c[k] = f^(k)(x0) / k!`.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Largest integer exponent handled by repeated multiplication; beyond it
/// powers go through the real-exponent path.
const MAX_INT_POWER: f64 = 64.0;

/// Numbers that the expression evaluator can run on: plain complex values
/// and truncated Taylor series in one or several variables.
pub trait Series: Clone + Sized {
    /// A constant with the same shape (order, centre) as `self`.
    fn lift(&self, c: C64) -> Self;
    /// The constant term.
    fn value(&self) -> C64;
    fn add(&self, other: &Self) -> Self;
    fn sub(&self, other: &Self) -> Self;
    fn mul(&self, other: &Self) -> Self;
    fn neg(&self) -> Self;
    fn scale(&self, c: C64) -> Self;
    fn conj(&self) -> Self;
    fn div(&self, other: &Self) -> Result<Self>;
    fn exp(&self) -> Self;
    fn ln(&self) -> Result<Self>;
    fn powf(&self, p: f64) -> Result<Self>;
    fn sin(&self) -> Self;
    fn cos(&self) -> Self;
    fn bump(&self) -> Result<Self>;

    fn sqrt(&self) -> Result<Self> {
        self.powf(0.5)
    }
}

/// The imaginary part must vanish and the real part must be strictly positive.
pub(crate) fn positive_real(c: C64, op: &'static str) -> Result<f64> {
    if c.re > 0.0 && c.im.abs() <= 1e-14 * c.re {
        Ok(c.re)
    } else {
        Err(Error::domain(op, c))
    }
}

pub(crate) fn real_arg(c: C64, op: &'static str) -> Result<f64> {
    if c.im.abs() <= 1e-14 * c.re.abs().max(1.0) {
        Ok(c.re)
    } else {
        Err(Error::domain(op, c))
    }
}

/// Integer exponents are evaluated exactly (any sign of the base);
/// everything else requires a positive base.
pub(crate) fn integer_exponent(p: f64) -> Option<i32> {
    if p.fract() == 0.0 && p.abs() <= MAX_INT_POWER {
        Some(p as i32)
    } else {
        None
    }
}

/// The compact bump atom `b(u) = exp(-1/(1-u^2))` on `|u| < 1`, zero elsewhere.
pub fn bump_value(u: f64) -> f64 {
    if u.abs() < 1.0 {
        (-1.0 / (1.0 - u * u)).exp()
    } else {
        0.0
    }
}

pub(crate) fn mul(a: &[C64], b: &[C64]) -> Vec<C64> {
    let n = a.len().min(b.len());
    let mut out = vec![ZERO; n];
    for (i, &ai) in a.iter().enumerate().take(n) {
        if ai == ZERO {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

pub(crate) fn div(a: &[C64], b: &[C64]) -> Result<Vec<C64>> {
    let n = a.len().min(b.len());
    if b[0] == ZERO {
        return Err(Error::domain("division", b[0]));
    }
    let mut out = vec![ZERO; n];
    for k in 0..n {
        let mut acc = a[k];
        for j in 1..=k {
            acc -= b[j] * out[k - j];
        }
        out[k] = acc / b[0];
    }
    Ok(out)
}

pub(crate) fn exp(a: &[C64]) -> Vec<C64> {
    let n = a.len();
    let mut out = vec![ZERO; n];
    out[0] = a[0].exp();
    for k in 1..n {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += a[j] * out[k - j] * j as f64;
        }
        out[k] = acc / k as f64;
    }
    out
}

pub(crate) fn ln(a: &[C64]) -> Result<Vec<C64>> {
    let a0 = positive_real(a[0], "log")?;
    let n = a.len();
    let mut out = vec![ZERO; n];
    out[0] = C64::new(a0.ln(), 0.0);
    for k in 1..n {
        let mut acc = ZERO;
        for j in 1..k {
            acc += out[j] * a[k - j] * j as f64;
        }
        out[k] = (a[k] - acc / k as f64) / a[0];
    }
    Ok(out)
}

pub(crate) fn powf(a: &[C64], p: f64) -> Result<Vec<C64>> {
    let n = a.len();
    if let Some(m) = integer_exponent(p) {
        return powi(a, m);
    }
    let a0 = positive_real(a[0], if p == 0.5 { "sqrt" } else { "power" })?;
    let mut out = vec![ZERO; n];
    out[0] = C64::new(a0.powf(p), 0.0);
    for k in 1..n {
        let mut acc = ZERO;
        for j in 1..=k {
            acc += a[j] * out[k - j] * ((p + 1.0) * j as f64 - k as f64);
        }
        out[k] = acc / (a[0] * k as f64);
    }
    Ok(out)
}

pub(crate) fn powi(a: &[C64], m: i32) -> Result<Vec<C64>> {
    let n = a.len();
    let mut base = if m < 0 {
        let mut one = vec![ZERO; n];
        one[0] = ONE;
        div(&one, a)?
    } else {
        a.to_vec()
    };
    let mut e = m.unsigned_abs();
    let mut acc = vec![ZERO; n];
    acc[0] = ONE;
    while e > 0 {
        if e & 1 == 1 {
            acc = mul(&acc, &base);
        }
        e >>= 1;
        if e > 0 {
            base = mul(&base, &base);
        }
    }
    Ok(acc)
}

pub(crate) fn sin_cos(a: &[C64]) -> (Vec<C64>, Vec<C64>) {
    let n = a.len();
    let mut s = vec![ZERO; n];
    let mut c = vec![ZERO; n];
    s[0] = a[0].sin();
    c[0] = a[0].cos();
    for k in 1..n {
        let mut acc_s = ZERO;
        let mut acc_c = ZERO;
        for j in 1..=k {
            let t = a[j] * j as f64;
            acc_s += t * c[k - j];
            acc_c -= t * s[k - j];
        }
        s[k] = acc_s / k as f64;
        c[k] = acc_c / k as f64;
    }
    (s, c)
}

pub(crate) fn bump(a: &[C64]) -> Result<Vec<C64>> {
    let u0 = real_arg(a[0], "bump")?;
    let n = a.len();
    if u0.abs() >= 1.0 {
        // flat outside the support, including the endpoints themselves
        return Ok(vec![ZERO; n]);
    }
    // exp(-1/(1-u^2))
    let sq = mul(a, a);
    let g: Vec<C64> = sq
        .iter()
        .enumerate()
        .map(|(k, &v)| if k == 0 { ONE - v } else { -v })
        .collect();
    let mut one = vec![ZERO; n];
    one[0] = ONE;
    let inv = div(&one, &g)?;
    let neg: Vec<C64> = inv.iter().map(|v| -v).collect();
    Ok(exp(&neg))
}

/// Taylor coefficients (order `n`) of the elementary function `f` at `x0`,
/// obtained by running the recurrences on the identity series `x0 + h`.
pub(crate) fn univariate_coeffs(f: Elementary, x0: C64, n: usize) -> Result<Vec<C64>> {
    let mut id = vec![ZERO; n + 1];
    id[0] = x0;
    if n >= 1 {
        id[1] = ONE;
    }
    f.apply(&id)
}

/// Elementary functions lifted to series by composition.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Elementary {
    Exp,
    Ln,
    Pow(f64),
    Sin,
    Cos,
    Bump,
}

impl Elementary {
    pub(crate) fn apply(self, a: &[C64]) -> Result<Vec<C64>> {
        match self {
            Elementary::Exp => Ok(exp(a)),
            Elementary::Ln => ln(a),
            Elementary::Pow(p) => powf(a, p),
            Elementary::Sin => Ok(sin_cos(a).0),
            Elementary::Cos => Ok(sin_cos(a).1),
            Elementary::Bump => bump(a),
        }
    }
}

impl Series for C64 {
    fn lift(&self, c: C64) -> Self {
        c
    }
    fn value(&self) -> C64 {
        *self
    }
    fn add(&self, other: &Self) -> Self {
        self + other
    }
    fn sub(&self, other: &Self) -> Self {
        self - other
    }
    fn mul(&self, other: &Self) -> Self {
        self * other
    }
    fn neg(&self) -> Self {
        -self
    }
    fn scale(&self, c: C64) -> Self {
        self * c
    }
    fn conj(&self) -> Self {
        Complex64::conj(self)
    }
    fn div(&self, other: &Self) -> Result<Self> {
        if *other == ZERO {
            Err(Error::domain("division", other))
        } else {
            Ok(self / other)
        }
    }
    fn exp(&self) -> Self {
        Complex64::exp(*self)
    }
    fn ln(&self) -> Result<Self> {
        Ok(C64::new(positive_real(*self, "log")?.ln(), 0.0))
    }
    fn powf(&self, p: f64) -> Result<Self> {
        if let Some(m) = integer_exponent(p) {
            if m < 0 && *self == ZERO {
                return Err(Error::domain("power", self));
            }
            return Ok(self.powi(m));
        }
        let x = positive_real(*self, if p == 0.5 { "sqrt" } else { "power" })?;
        Ok(C64::new(x.powf(p), 0.0))
    }
    fn sin(&self) -> Self {
        Complex64::sin(*self)
    }
    fn cos(&self) -> Self {
        Complex64::cos(*self)
    }
    fn bump(&self) -> Result<Self> {
        Ok(C64::new(bump_value(real_arg(*self, "bump")?), 0.0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn re(v: &[f64]) -> Vec<C64> {
        v.iter().map(|&x| C64::new(x, 0.0)).collect()
    }

    #[test]
    fn powf_matches_binomial_series() {
        let a = re(&[1.0, 1.0, 0.0, 0.0, 0.0]);
        let b = powf(&a, 0.5).unwrap();
        let expect = [1.0, 0.5, -0.125, 0.0625, -0.0390625];
        for (x, e) in b.iter().zip(expect) {
            assert!((x.re - e).abs() < 1e-15);
        }
    }

    #[test]
    fn ln_inverts_exp() {
        let a = re(&[0.3, -1.2, 0.7, 2.0, 0.1, -0.4]);
        let back = ln(&exp(&a)).unwrap();
        for (x, y) in a.iter().zip(&back) {
            assert!((x - y).norm() < 1e-13);
        }
    }

    #[test]
    fn negative_integer_power_of_negative_base() {
        let a = re(&[-2.0, 1.0, 0.0]);
        let b = powf(&a, -1.0).unwrap();
        // 1/(-2+h) = -1/2 - h/4 - h^2/8
        assert!((b[0].re + 0.5).abs() < 1e-15);
        assert!((b[1].re + 0.25).abs() < 1e-15);
        assert!((b[2].re + 0.125).abs() < 1e-15);
    }

    #[test]
    fn domain_violations() {
        assert!(matches!(
            ln(&re(&[-1.0, 1.0])),
            Err(Error::DomainViolation { .. })
        ));
        assert!(powf(&re(&[-1.0, 1.0]), 0.5).is_err());
        assert!(div(&re(&[1.0]), &re(&[0.0])).is_err());
    }

    #[test]
    fn bump_taylor_at_origin() {
        // b(u)/b(0) = 1 - u^2 - u^4/2 - u^6/6 + ...
        let a = re(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let b = bump(&a).unwrap();
        let e1 = (-1.0f64).exp();
        let expect = [1.0, 0.0, -1.0, 0.0, -0.5, 0.0, -1.0 / 6.0];
        for (x, e) in b.iter().zip(expect) {
            assert!((x.re - e * e1).abs() < 1e-15, "{x} vs {}", e * e1);
        }
        assert!(bump(&re(&[1.0, 1.0])).unwrap().iter().all(|c| *c == ZERO));
    }
}
