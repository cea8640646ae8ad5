use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};
use crate::jet::{factorial, Jet};
use crate::series::{self, Elementary, Series, C64, ONE, ZERO};

/// Exponent tuple `(a_1, ..., a_d)` of a mixed partial derivative.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    pub fn zero(d: usize) -> Self {
        MultiIndex(vec![0; d])
    }

    /// The unit index `e_var` scaled by `k`.
    pub fn axis(d: usize, var: usize, k: u32) -> Self {
        let mut a = vec![0; d];
        a[var] = k;
        MultiIndex(a)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Componentwise comparison `self <= other`.
    pub fn le(&self, other: &MultiIndex) -> bool {
        self.0.len() == other.0.len() && self.0.iter().zip(&other.0).all(|(a, b)| a <= b)
    }

    /// `a_1! * ... * a_d!`
    pub fn factorial(&self) -> f64 {
        self.0.iter().map(|&a| factorial(a as usize)).product()
    }

    /// `x^a` for a point `x`.
    pub fn monomial(&self, x: &[f64]) -> f64 {
        self.0
            .iter()
            .zip(x)
            .map(|(&a, &xi)| xi.powi(a as i32))
            .product()
    }

    /// All indices of total degree at most `n` in graded order.
    pub fn all(d: usize, n: usize) -> Vec<MultiIndex> {
        layout(d, n).indices.clone()
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, a) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{a}")?;
        }
        write!(f, ")")
    }
}

/// Coefficient layout shared by all multivariate jets of the same
/// dimension and order. Indices are sorted by total degree, so the layout of
/// a lower order is a prefix of this one.
#[derive(Debug)]
pub(crate) struct Layout {
    d: usize,
    order: usize,
    indices: Vec<MultiIndex>,
    lookup: HashMap<Vec<u32>, usize>,
    /// `pairs[starts[k]..starts[k + 1]]` lists `(i, j)` with `indices[i] + indices[j] = indices[k]`.
    starts: Vec<usize>,
    pairs: Vec<(u32, u32)>,
}

fn graded_indices(d: usize, n: usize) -> Vec<MultiIndex> {
    fn fill(rest: usize, pos: usize, cur: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if pos + 1 == cur.len() {
            cur[pos] = rest as u32;
            out.push(MultiIndex(cur.clone()));
            return;
        }
        for a in (0..=rest).rev() {
            cur[pos] = a as u32;
            fill(rest - a, pos + 1, cur, out);
        }
    }
    let mut out = Vec::new();
    if d == 0 {
        out.push(MultiIndex(Vec::new()));
        return out;
    }
    let mut cur = vec![0; d];
    for m in 0..=n {
        fill(m, 0, &mut cur, &mut out);
    }
    out
}

impl Layout {
    fn build(d: usize, order: usize) -> Layout {
        let indices = graded_indices(d, order);
        let lookup: HashMap<Vec<u32>, usize> = indices
            .iter()
            .enumerate()
            .map(|(i, a)| (a.0.clone(), i))
            .collect();
        let mut buckets: Vec<Vec<(u32, u32)>> = vec![Vec::new(); indices.len()];
        let mut sum = vec![0u32; d];
        for (i, a) in indices.iter().enumerate() {
            let da = a.degree() as usize;
            for (j, b) in indices.iter().enumerate() {
                if da + b.degree() as usize > order {
                    // graded order: every later index has at least this degree
                    break;
                }
                for v in 0..d {
                    sum[v] = a.0[v] + b.0[v];
                }
                let k = lookup[&sum];
                buckets[k].push((i as u32, j as u32));
            }
        }
        let mut starts = Vec::with_capacity(indices.len() + 1);
        let mut pairs = Vec::new();
        for b in buckets {
            starts.push(pairs.len());
            pairs.extend(b);
        }
        starts.push(pairs.len());
        Layout {
            d,
            order,
            indices,
            lookup,
            starts,
            pairs,
        }
    }

    pub(crate) fn len(&self) -> usize {
        self.indices.len()
    }

    fn index_of(&self, a: &[u32]) -> Option<usize> {
        self.lookup.get(a).copied()
    }
}

pub(crate) fn layout(d: usize, order: usize) -> Arc<Layout> {
    static CACHE: OnceLock<Mutex<HashMap<(usize, usize), Arc<Layout>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut map = cache.lock().unwrap_or_else(|e| e.into_inner());
    map.entry((d, order))
        .or_insert_with(|| Arc::new(Layout::build(d, order)))
        .clone()
}

/// Truncated Taylor expansion of a function of `d` variables, all mixed
/// partials of total order at most `order`. The coefficient at `a` is
/// `∂^a f(center) / a!`.
#[derive(Clone)]
pub struct MJet {
    center: Vec<f64>,
    layout: Arc<Layout>,
    coeffs: Vec<C64>,
}

impl fmt::Debug for MJet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MJet")
            .field("center", &self.center)
            .field("order", &self.layout.order)
            .field("coeffs", &self.coeffs)
            .finish()
    }
}

impl PartialEq for MJet {
    fn eq(&self, other: &Self) -> bool {
        self.center == other.center
            && self.layout.d == other.layout.d
            && self.layout.order == other.layout.order
            && self.coeffs == other.coeffs
    }
}

impl MJet {
    pub fn constant(center: &[f64], order: usize, c: C64) -> Self {
        let layout = layout(center.len(), order);
        let mut coeffs = vec![ZERO; layout.len()];
        coeffs[0] = c;
        MJet {
            center: center.to_vec(),
            layout,
            coeffs,
        }
    }

    /// The coordinate function `x_var` expanded at `center`.
    pub fn variable(center: &[f64], var: usize, order: usize) -> Self {
        let mut m = MJet::constant(center, order, C64::new(center[var], 0.0));
        if order >= 1 {
            let k = m.layout.index_of(&MultiIndex::axis(center.len(), var, 1).0).unwrap();
            m.coeffs[k] = ONE;
        }
        m
    }

    /// Builds a jet from coefficient values keyed by multi-index; missing
    /// entries are zero.
    pub fn from_fn(center: &[f64], order: usize, mut f: impl FnMut(&MultiIndex) -> C64) -> Self {
        let layout = layout(center.len(), order);
        let coeffs = layout.indices.iter().map(&mut f).collect();
        MJet {
            center: center.to_vec(),
            layout,
            coeffs,
        }
    }

    pub fn dim(&self) -> usize {
        self.layout.d
    }

    pub fn order(&self) -> usize {
        self.layout.order
    }

    pub fn center(&self) -> &[f64] {
        &self.center
    }

    pub fn indices(&self) -> &[MultiIndex] {
        &self.layout.indices
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Taylor coefficient `∂^a f / a!`; zero beyond the truncation order.
    pub fn coeff(&self, a: &MultiIndex) -> C64 {
        self.layout
            .index_of(&a.0)
            .map(|k| self.coeffs[k])
            .unwrap_or(ZERO)
    }

    /// The mixed partial derivative `∂^a f(center)`.
    pub fn deriv(&self, a: &MultiIndex) -> Result<C64> {
        match self.layout.index_of(&a.0) {
            Some(k) => Ok(self.coeffs[k] * a.factorial()),
            None => Err(Error::OrderExceeded {
                k: a.degree() as usize,
                order: self.order(),
            }),
        }
    }

    pub fn truncate(&self, order: usize) -> MJet {
        if order >= self.order() {
            return self.clone();
        }
        let layout = layout(self.dim(), order);
        let coeffs = self.coeffs[..layout.len()].to_vec();
        MJet {
            center: self.center.clone(),
            layout,
            coeffs,
        }
    }

    /// Truncates, or extends with zero coefficients, to the given order.
    pub fn resize(&self, order: usize) -> MJet {
        if order <= self.order() {
            return self.truncate(order);
        }
        let mut coeffs = self.coeffs.clone();
        let layout = layout(self.dim(), order);
        coeffs.resize(layout.len(), ZERO);
        MJet {
            center: self.center.clone(),
            layout,
            coeffs,
        }
    }

    /// The univariate jet obtained by freezing every variable but `var`.
    pub fn restrict_to_var(&self, var: usize) -> Jet {
        let d = self.dim();
        let coeffs = (0..=self.order())
            .map(|k| self.coeff(&MultiIndex::axis(d, var, k as u32)))
            .collect();
        Jet::new(self.center[var], coeffs)
    }

    /// Partial derivative in `var`; the result has order one less.
    pub fn partial(&self, var: usize) -> MJet {
        let order = self.order().saturating_sub(1);
        let mut shifted = vec![0u32; self.dim()];
        MJet::from_fn(&self.center, order, |a| {
            if self.order() == 0 {
                return ZERO;
            }
            shifted.clone_from(&a.0);
            shifted[var] += 1;
            let k = self.layout.index_of(&shifted).unwrap();
            self.coeffs[k] * (a.0[var] + 1) as f64
        })
    }

    /// The coefficient of `(x_var - center_var)^k`, as a jet in the
    /// remaining variables (its `var` exponent is always zero).
    pub fn slice(&self, var: usize, k: usize) -> MJet {
        let order = self.order().saturating_sub(k);
        let mut shifted = vec![0u32; self.dim()];
        MJet::from_fn(&self.center, order, |a| {
            if a.0[var] != 0 || k > self.order() {
                return ZERO;
            }
            shifted.clone_from(&a.0);
            shifted[var] = k as u32;
            self.coeffs[self.layout.index_of(&shifted).unwrap()]
        })
    }

    /// The same function viewed as one of `d + 1` variables, constant in a
    /// new variable inserted at position `pos` and expanded at `at`.
    pub fn insert_var(&self, pos: usize, at: f64) -> MJet {
        let mut center = self.center.clone();
        center.insert(pos, at);
        let mut reduced = Vec::with_capacity(self.dim());
        MJet::from_fn(&center, self.order(), |a| {
            if a.0[pos] != 0 {
                return ZERO;
            }
            reduced.clear();
            reduced.extend(a.0.iter().enumerate().filter(|&(i, _)| i != pos).map(|(_, &e)| e));
            self.coeffs[self.layout.index_of(&reduced).unwrap()]
        })
    }

    /// Restriction to the hyperplane `x_pos = center_pos`, as a jet in the
    /// remaining `d - 1` variables.
    pub fn drop_var(&self, pos: usize) -> MJet {
        let mut center = self.center.clone();
        center.remove(pos);
        let mut full = vec![0u32; self.dim()];
        MJet::from_fn(&center, self.order(), |a| {
            let mut k = 0;
            for (i, f) in full.iter_mut().enumerate() {
                if i == pos {
                    *f = 0;
                } else {
                    *f = a.0[k];
                    k += 1;
                }
            }
            self.coeffs[self.layout.index_of(&full).unwrap()]
        })
    }

    /// Re-expands the polynomial at a new set of inner functions:
    /// returns `Σ_a c_a Π_i (g_i - center_i)^{a_i}`, a jet in the variables
    /// of the `g_i`.
    pub fn substitute(&self, inner: &[MJet]) -> Result<MJet> {
        if inner.len() != self.dim() {
            return Err(Error::InvalidInput(format!(
                "substitution needs {} inner jets, got {}",
                self.dim(),
                inner.len()
            )));
        }
        let Some(first) = inner.first() else {
            return Ok(self.clone());
        };
        let n = self.order();
        let powers: Vec<Vec<MJet>> = inner
            .iter()
            .zip(&self.center)
            .map(|(g, &c)| {
                let delta = g.sub(&g.lift(C64::new(c, 0.0)));
                let mut p = vec![delta.lift(ONE)];
                for k in 1..=n {
                    let next = p[k - 1].mul(&delta);
                    p.push(next);
                }
                p
            })
            .collect();
        let mut acc = first.lift(ZERO);
        for (a, &c) in self.layout.indices.iter().zip(&self.coeffs) {
            if c == ZERO {
                continue;
            }
            let mut term = first.lift(c);
            for (i, &ai) in a.0.iter().enumerate() {
                if ai > 0 {
                    term = term.mul(&powers[i][ai as usize]);
                }
            }
            acc = acc.add(&term);
        }
        Ok(acc)
    }

    /// Evaluates the truncated polynomial at `center + h`.
    pub fn eval_at(&self, h: &[f64]) -> C64 {
        self.layout
            .indices
            .iter()
            .zip(&self.coeffs)
            .map(|(a, &c)| c * a.monomial(h))
            .sum()
    }

    fn zip(&self, other: &MJet, f: impl Fn(C64, C64) -> C64) -> MJet {
        let (lo, _) = self.common(other);
        let coeffs = (0..lo.len())
            .map(|k| f(self.coeffs[k], other.coeffs[k]))
            .collect();
        MJet {
            center: self.center.clone(),
            layout: lo,
            coeffs,
        }
    }

    fn common(&self, other: &MJet) -> (Arc<Layout>, usize) {
        debug_assert_eq!(self.dim(), other.dim());
        if self.order() <= other.order() {
            (self.layout.clone(), self.order())
        } else {
            (other.layout.clone(), other.order())
        }
    }

    fn with_coeffs(&self, coeffs: Vec<C64>) -> MJet {
        MJet {
            center: self.center.clone(),
            layout: self.layout.clone(),
            coeffs,
        }
    }

    /// `f(self)` for an elementary `f`, by Horner evaluation of the Taylor
    /// polynomial of `f` at the constant term in powers of `self - value`.
    fn compose(&self, f: Elementary) -> Result<MJet> {
        let n = self.order();
        let fk = series::univariate_coeffs(f, self.coeffs[0], n)?;
        let mut delta = self.clone();
        delta.coeffs[0] = ZERO;
        let mut acc = self.lift(fk[n]);
        for k in (0..n).rev() {
            acc = acc.mul(&delta);
            acc.coeffs[0] += fk[k];
        }
        Ok(acc)
    }
}

impl Series for MJet {
    fn lift(&self, c: C64) -> Self {
        let mut coeffs = vec![ZERO; self.coeffs.len()];
        coeffs[0] = c;
        self.with_coeffs(coeffs)
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
        let (lo, _) = self.common(other);
        let mut coeffs = vec![ZERO; lo.len()];
        for (k, out) in coeffs.iter_mut().enumerate() {
            let mut acc = ZERO;
            for &(i, j) in &lo.pairs[lo.starts[k]..lo.starts[k + 1]] {
                acc += self.coeffs[i as usize] * other.coeffs[j as usize];
            }
            *out = acc;
        }
        MJet {
            center: self.center.clone(),
            layout: lo,
            coeffs,
        }
    }
    fn neg(&self) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|c| -c).collect())
    }
    fn scale(&self, c: C64) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|x| x * c).collect())
    }
    fn conj(&self) -> Self {
        self.with_coeffs(self.coeffs.iter().map(|x| x.conj()).collect())
    }
    fn div(&self, other: &Self) -> Result<Self> {
        let b0 = other.coeffs[0];
        if b0 == ZERO {
            return Err(Error::domain("division", b0));
        }
        let (lo, _) = self.common(other);
        let mut out = vec![ZERO; lo.len()];
        for k in 0..lo.len() {
            let mut acc = self.coeffs[k];
            for &(i, j) in &lo.pairs[lo.starts[k]..lo.starts[k + 1]] {
                if i != 0 {
                    acc -= other.coeffs[i as usize] * out[j as usize];
                }
            }
            out[k] = acc / b0;
        }
        Ok(MJet {
            center: self.center.clone(),
            layout: lo,
            coeffs: out,
        })
    }
    fn exp(&self) -> Self {
        self.compose(Elementary::Exp).expect("exp is entire")
    }
    fn ln(&self) -> Result<Self> {
        self.compose(Elementary::Ln)
    }
    fn powf(&self, p: f64) -> Result<Self> {
        self.compose(Elementary::Pow(p))
    }
    fn sin(&self) -> Self {
        self.compose(Elementary::Sin).expect("sin is entire")
    }
    fn cos(&self) -> Self {
        self.compose(Elementary::Cos).expect("cos is entire")
    }
    fn bump(&self) -> Result<Self> {
        self.compose(Elementary::Bump)
    }
}
