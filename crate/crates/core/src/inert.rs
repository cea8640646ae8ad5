//! Sampled certification of X-inert weight families: estimated derivative
//! constants `Ĉ(j) = sup X_T^{-|j|} |x^j ∂^j w_T(x)|`, pointwise products
//! of families, and the decay of Fourier transforms in one variable.

use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{BoundExpr, SeriesFn};
use crate::expr::{Expr, Params};
use crate::mjet::{MJet, MultiIndex};
use crate::oracle::{quad1d, IntegralSpec};
use crate::series::{Series, C64};

/// Largest derivative order [`check_inert`] accepts.
pub const MAX_ORDER: usize = 8;

/// Weight values allowed outside the declared support.
pub const SUPPORT_TOL: f64 = 1e-12;

/// Factor between the reference member's constants and the default ceiling.
pub const CEILING_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub enum ParamRange {
    Interval(f64, f64),
    /// Sampled uniformly in `log`; both ends positive.
    LogInterval(f64, f64),
    List(Vec<f64>),
}

impl ParamRange {
    /// The value at quantile `u ∈ [0, 1)`.
    fn sample(&self, u: f64) -> f64 {
        match self {
            ParamRange::Interval(a, b) => a + (b - a) * u,
            ParamRange::LogInterval(a, b) => (a.ln() + (b.ln() - a.ln()) * u).exp(),
            ParamRange::List(v) => v[((u * v.len() as f64) as usize).min(v.len() - 1)],
        }
    }

    fn reference(&self) -> f64 {
        match self {
            ParamRange::Interval(a, _) | ParamRange::LogInterval(a, _) => *a,
            ParamRange::List(v) => v[0],
        }
    }

    fn check(&self, name: &str) -> Result<()> {
        let ok = match self {
            ParamRange::Interval(a, b) => a.is_finite() && b.is_finite() && a <= b,
            ParamRange::LogInterval(a, b) => *a > 0.0 && b.is_finite() && a <= b,
            ParamRange::List(v) => !v.is_empty() && v.iter().all(|x| x.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("bad range for parameter `{name}`: {self:?}")))
        }
    }
}

/// Builds the member function of a numerically defined family.
pub type MemberFn = dyn Fn(&Params) -> Result<Arc<dyn SeriesFn>> + Send + Sync;

#[derive(Clone)]
pub enum FamilyWeight {
    Expr(Expr),
    Numeric(Arc<MemberFn>),
}

impl fmt::Debug for FamilyWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FamilyWeight::Expr(e) => write!(f, "Expr({e})"),
            FamilyWeight::Numeric(_) => write!(f, "Numeric(..)"),
        }
    }
}

/// A parameterised family `{w_T}` with its claimed inertness scale.
///
/// The support box of variable `i` is `[max lower[i], min upper[i]]` and
/// the claimed scale is `max scale`; lists arise from products.
#[derive(Debug, Clone)]
pub struct FamilySpec {
    pub dim: usize,
    pub weight: FamilyWeight,
    pub params: Vec<(String, ParamRange)>,
    pub lower: Vec<Vec<Expr>>,
    pub upper: Vec<Vec<Expr>>,
    pub scale: Vec<Expr>,
}

impl FamilySpec {
    /// Family supported on `∏ [X_i, 2X_i]`.
    pub fn dyadic(weight: Expr, params: Vec<(String, ParamRange)>, support: Vec<Expr>, scale: Expr) -> Self {
        let dim = support.len();
        FamilySpec {
            dim,
            weight: FamilyWeight::Expr(weight),
            params,
            lower: support.iter().map(|x| vec![x.clone()]).collect(),
            upper: support.iter().map(|x| vec![Expr::Const(2.0) * x.clone()]).collect(),
            scale: vec![scale],
        }
    }

    /// Family supported on the box `∏ [a_i, b_i]`.
    pub fn boxed(weight: FamilyWeight, params: Vec<(String, ParamRange)>, bounds: Vec<(Expr, Expr)>, scale: Expr) -> Self {
        FamilySpec {
            dim: bounds.len(),
            weight,
            params,
            lower: bounds.iter().map(|b| vec![b.0.clone()]).collect(),
            upper: bounds.iter().map(|b| vec![b.1.clone()]).collect(),
            scale: vec![scale],
        }
    }

    fn validate(&self) -> Result<()> {
        if self.lower.len() != self.dim || self.upper.len() != self.dim {
            return Err(Error::InvalidInput("support box does not match the dimension".into()));
        }
        for (name, range) in &self.params {
            range.check(name)?;
        }
        if let FamilyWeight::Expr(e) = &self.weight {
            if e.arity() > self.dim {
                return Err(Error::InvalidInput(format!(
                    "weight uses more than {} variables",
                    self.dim
                )));
            }
        }
        Ok(())
    }

    /// The `k`-th low-discrepancy parameter sample.
    pub fn sample(&self, k: usize) -> Params {
        self.params
            .iter()
            .enumerate()
            .map(|(i, (name, range))| (name.as_str(), range.sample(halton(k + 1, PRIMES[i % PRIMES.len()]))))
            .collect()
    }

    /// The member at the lower end of every range.
    pub fn reference(&self) -> Params {
        self.params
            .iter()
            .map(|(name, range)| (name.as_str(), range.reference()))
            .collect()
    }

    /// Member function, support box and claimed scale at `params`.
    pub fn member(&self, params: &Params) -> Result<Member> {
        let value = |e: &Expr| -> Result<f64> {
            let b = e.bind(params)?;
            if b.has_vars() {
                return Err(Error::InvalidInput(format!("scale `{e}` depends on x")));
            }
            Ok(crate::eval::eval(&b, &[], &Params::new())?.re)
        };
        let mut bounds = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut lo = f64::NEG_INFINITY;
            for e in &self.lower[i] {
                lo = lo.max(value(e)?);
            }
            let mut hi = f64::INFINITY;
            for e in &self.upper[i] {
                hi = hi.min(value(e)?);
            }
            if !(lo.is_finite() && hi.is_finite()) {
                return Err(Error::InvalidInput(format!("unbounded support in x{}", i + 1)));
            }
            bounds.push((lo, hi));
        }
        let mut scale = f64::NEG_INFINITY;
        for e in &self.scale {
            scale = scale.max(value(e)?);
        }
        if !(scale >= 1.0) {
            return Err(Error::InvalidInput(format!("claimed scale {scale} is below 1")));
        }
        let f: Arc<dyn SeriesFn> = match &self.weight {
            FamilyWeight::Expr(e) => Arc::new(BoundExpr::new(e, params, self.dim)?),
            FamilyWeight::Numeric(build) => build(params)?,
        };
        Ok(Member { f, bounds, scale })
    }

    fn param_names(&self) -> Vec<&str> {
        self.params.iter().map(|(n, _)| n.as_str()).collect()
    }
}

pub struct Member {
    pub f: Arc<dyn SeriesFn>,
    pub bounds: Vec<(f64, f64)>,
    pub scale: f64,
}

impl Member {
    /// Members of a product whose factor supports do not meet vanish.
    pub fn is_empty(&self) -> bool {
        self.bounds.iter().any(|&(a, b)| a >= b)
    }
}

const PRIMES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

/// Radical inverse of `k` in `base`.
fn halton(mut k: usize, base: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while k > 0 {
        f /= base as f64;
        r += f * (k as u64 % base) as f64;
        k /= base as usize;
    }
    r
}

/// Midpoint grid with `n` points per axis.
fn grid(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for &(a, b) in bounds {
        let mut next = Vec::with_capacity(out.len() * n);
        for p in &out {
            for k in 0..n {
                let mut q = p.clone();
                q.push(a + (b - a) * (k as f64 + 0.5) / n as f64);
                next.push(q);
            }
        }
        out = next;
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct InertRow {
    pub j: MultiIndex,
    pub constant: f64,
    pub ceiling: f64,
    pub worst_params: Params,
    pub worst_point: Vec<f64>,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InertReport {
    pub rows: Vec<InertRow>,
    pub param_samples: usize,
    pub point_samples: usize,
    pub pass: bool,
}

impl InertReport {
    pub fn row(&self, j: &MultiIndex) -> Option<&InertRow> {
        self.rows.iter().find(|r| &r.j == j)
    }

    pub fn constant(&self, j: &[u32]) -> f64 {
        self.row(&MultiIndex(j.to_vec())).map(|r| r.constant).unwrap_or(f64::NAN)
    }
}

/// Scaled constants `X^{-|j|} |x^j ∂^j w|` of one member, maximised over
/// the point grid, with the maximising point.
fn member_constants(member: &Member, max_order: usize, n_points: usize) -> Result<Vec<(f64, Vec<f64>)>> {
    let pts = grid(&member.bounds, n_points);
    let d = member.bounds.len();
    let indices = MultiIndex::all(d, max_order);
    if member.is_empty() {
        return Ok(vec![(0.0, Vec::new()); indices.len()]);
    }
    let mut best: Vec<(f64, Vec<f64>)> = vec![(0.0, Vec::new()); indices.len()];
    for p in &pts {
        let jet = member.f.mjet(p, max_order)?;
        for (k, j) in indices.iter().enumerate() {
            let v = member.scale.powi(-(j.degree() as i32)) * (j.monomial(p) * jet.deriv(j)?).norm();
            if v > best[k].0 || best[k].1.is_empty() {
                best[k] = (v, p.clone());
            }
        }
    }
    Ok(best)
}

/// Checks that the member vanishes outside its box, on a coarse grid of the
/// surrounding region `∏ [a/2, 2b]`.
fn check_support(member: &Member) -> Result<()> {
    if member.is_empty() {
        return Ok(());
    }
    let outer: Vec<(f64, f64)> = member
        .bounds
        .iter()
        .map(|&(a, b)| (if a > 0.0 { 0.5 * a } else { a - (b - a) }, 2.0 * b.abs().max(b + (b - a))))
        .collect();
    for p in grid(&outer, 9) {
        let inside = p.iter().zip(&member.bounds).all(|(x, (a, b))| a <= x && x <= b);
        if inside {
            continue;
        }
        let v = match member.f.value(&p) {
            Ok(v) => v.norm(),
            // outside the domain of the formula: nothing to check
            Err(Error::DomainViolation { .. }) => continue,
            Err(e) => return Err(e),
        };
        if v > SUPPORT_TOL {
            return Err(Error::SupportViolation { point: p, value: v });
        }
    }
    Ok(())
}

/// Estimates `Ĉ(j)` for `|j| ≤ max_order` from `n_param_samples` parameter
/// samples and an `n_point_samples`-per-axis grid over each member's
/// support. With `ceiling = None` each `Ĉ(j)` is compared with
/// `10·max(1, C_ref(j))`, `C_ref` the constants of the reference member;
/// a number is used as a uniform ceiling.
pub fn check_inert(
    family: &FamilySpec,
    max_order: usize,
    n_param_samples: usize,
    n_point_samples: usize,
    ceiling: Option<f64>,
) -> Result<InertReport> {
    check_inert_seeded(family, max_order, n_param_samples, n_point_samples, ceiling, 0)
}

/// [`check_inert`] starting the parameter sequence at index `seed`.
pub fn check_inert_seeded(
    family: &FamilySpec,
    max_order: usize,
    n_param_samples: usize,
    n_point_samples: usize,
    ceiling: Option<f64>,
    seed: u64,
) -> Result<InertReport> {
    family.validate()?;
    if max_order > MAX_ORDER {
        return Err(Error::InvalidInput(format!(
            "max_order {max_order} exceeds {MAX_ORDER}"
        )));
    }
    if n_param_samples == 0 || n_point_samples == 0 {
        return Err(Error::InvalidInput("sample counts must be at least 1".into()));
    }
    let indices = MultiIndex::all(family.dim, max_order);
    let samples: Vec<Params> = if family.params.is_empty() {
        vec![Params::new()]
    } else {
        (0..n_param_samples).map(|k| family.sample(k + seed as usize)).collect()
    };
    let per_sample: Vec<Vec<(f64, Vec<f64>)>> = samples
        .par_iter()
        .map(|params| {
            let member = family.member(params)?;
            check_support(&member)?;
            member_constants(&member, max_order, n_point_samples)
        })
        .collect::<Result<_>>()?;
    let ceilings: Vec<f64> = match ceiling {
        Some(c) => vec![c; indices.len()],
        None => {
            let reference = family.member(&family.reference())?;
            member_constants(&reference, max_order, n_point_samples)?
                .iter()
                .map(|(c, _)| CEILING_FACTOR * c.max(1.0))
                .collect()
        }
    };
    let mut rows = Vec::with_capacity(indices.len());
    for (k, j) in indices.iter().enumerate() {
        let mut worst = (0.0f64, 0usize);
        for (s, consts) in per_sample.iter().enumerate() {
            if consts[k].0 > worst.0 {
                worst = (consts[k].0, s);
            }
        }
        let (constant, s) = worst;
        rows.push(InertRow {
            j: j.clone(),
            constant,
            ceiling: ceilings[k],
            worst_params: samples[s].clone(),
            worst_point: per_sample[s][k].1.clone(),
            pass: constant <= ceilings[k],
        });
    }
    let pass = rows.iter().all(|r| r.pass);
    Ok(InertReport {
        rows,
        param_samples: samples.len(),
        point_samples: n_point_samples.pow(family.dim as u32),
        pass,
    })
}

/// Pointwise product of two functions of the same variables.
struct ProductFn(Arc<dyn SeriesFn>, Arc<dyn SeriesFn>);

impl SeriesFn for ProductFn {
    fn dim(&self) -> usize {
        self.0.dim().max(self.1.dim())
    }

    fn value(&self, x: &[f64]) -> Result<C64> {
        Ok(self.0.value(x)? * self.1.value(x)?)
    }

    fn series(&self, inputs: &[MJet]) -> Result<MJet> {
        Ok(self.0.series(inputs)?.mul(&self.1.series(inputs)?))
    }
}

/// The family `{w_T · v_T'}` with claimed scale `max(X_T, Y_T')`.
pub fn product_family(f: &FamilySpec, g: &FamilySpec) -> Result<FamilySpec> {
    if f.dim != g.dim {
        return Err(Error::InvalidInput(format!(
            "families have dimensions {} and {}",
            f.dim, g.dim
        )));
    }
    let names = f.param_names();
    for n in g.param_names() {
        if names.contains(&n) {
            return Err(Error::NameCollision(n.to_string()));
        }
    }
    let weight = match (&f.weight, &g.weight) {
        (FamilyWeight::Expr(a), FamilyWeight::Expr(b)) => FamilyWeight::Expr(a.clone() * b.clone()),
        _ => {
            let (fw, gw, dim) = (f.weight.clone(), g.weight.clone(), f.dim);
            let build = move |p: &Params| -> Result<Arc<dyn SeriesFn>> {
                let one = |w: &FamilyWeight| -> Result<Arc<dyn SeriesFn>> {
                    match w {
                        FamilyWeight::Expr(e) => Ok(Arc::new(BoundExpr::new(e, p, dim)?)),
                        FamilyWeight::Numeric(b) => b(p),
                    }
                };
                Ok(Arc::new(ProductFn(one(&fw)?, one(&gw)?)))
            };
            FamilyWeight::Numeric(Arc::new(build))
        }
    };
    let join = |a: &[Vec<Expr>], b: &[Vec<Expr>]| -> Vec<Vec<Expr>> {
        a.iter().zip(b).map(|(x, y)| x.iter().chain(y).cloned().collect()).collect()
    };
    Ok(FamilySpec {
        dim: f.dim,
        weight,
        params: f.params.iter().chain(&g.params).cloned().collect(),
        lower: join(&f.lower, &g.lower),
        upper: join(&f.upper, &g.upper),
        scale: f.scale.iter().chain(&g.scale).cloned().collect(),
    })
}

/// Settings of a Fourier decay check.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierCheck {
    /// The transformed variable.
    pub var: usize,
    /// Frequencies `t₁` at which `ŵ` is computed.
    pub grid: Vec<f64>,
    /// Ambient scale of the threshold `Y₁ ≫ q^ε X/X₁`.
    pub q: f64,
    pub eps: f64,
    /// Decay exponent the tail is tested against.
    pub a: f64,
    /// Highest `t₁`-derivative whose integration-by-parts bound is checked.
    pub max_deriv: usize,
    /// Oracle tolerance.
    pub tol: f64,
}

impl FourierCheck {
    pub fn new(var: usize, grid: Vec<f64>, q: f64, a: f64) -> Self {
        FourierCheck {
            var,
            grid,
            q,
            eps: 0.1,
            a,
            max_deriv: 3,
            tol: 1e-12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierRow {
    pub t: f64,
    /// `X₁^{-1} ŵ(t)`.
    pub value: C64,
    pub error_estimate: f64,
    /// `(1 + |t| X₁/X)^{-A}`.
    pub envelope: f64,
    /// `|t|^k |∂_t^k X₁^{-1} ŵ(t)|` for `k = 0..=max_deriv`.
    pub scaled_derivs: Vec<f64>,
    /// `|t| ≥ q^ε X/X₁`.
    pub beyond_threshold: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierReport {
    pub rows: Vec<FourierRow>,
    /// `X₁^{-1} ∫ |∂_x^k (x^k w)| dx`, the integration-by-parts bounds on
    /// `scaled_derivs[k]`.
    pub bounds: Vec<f64>,
    pub derivative_bounds_hold: bool,
    /// Fitted exponent `α` in `|X₁^{-1} ŵ| ∝ (1 + |t| X₁/X)^{-α}` over the
    /// resolved tail; `None` with fewer than two resolved points.
    pub fitted_exponent: Option<f64>,
    pub tail_points: usize,
    pub peak: f64,
    pub support_scale: f64,
    pub scale: f64,
}

impl FourierReport {
    /// Share of `∫|ŵ|² dt` (trapezoidal on the grid) inside `[lo, hi]`.
    pub fn mass_fraction(&self, lo: f64, hi: f64) -> f64 {
        let mut total = 0.0;
        let mut inside = 0.0;
        for w in self.rows.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let m = 0.5 * (b.t - a.t) * (a.value.norm_sqr() + b.value.norm_sqr());
            total += m;
            let mid = 0.5 * (a.t + b.t);
            if lo <= mid && mid <= hi {
                inside += m;
            }
        }
        if total > 0.0 {
            inside / total
        } else {
            0.0
        }
    }

    pub fn passes(&self) -> bool {
        self.derivative_bounds_hold && self.fitted_exponent.is_some_and(|e| e >= 0.0)
    }
}

/// Fourier transform `ŵ(t₁) = ∫ w(x) e(-x₁ t₁) dx₁` of the reference
/// member in `x_var`, the other variables fixed at the centres of their
/// support, checked against integration-by-parts derivative bounds and
/// fitted for tail decay.
pub fn fourier_decay_check(family: &FamilySpec, check: &FourierCheck) -> Result<FourierReport> {
    family.validate()?;
    let params = family.reference();
    let member = family.member(&params)?;
    let var = check.var;
    if var >= family.dim {
        return Err(Error::InvalidInput(format!("no variable x{}", var + 1)));
    }
    if !(check.q >= 1.0) {
        return Err(Error::InvalidInput("q must be at least 1".into()));
    }
    let weight = match &family.weight {
        FamilyWeight::Expr(e) => e.bind(&params)?,
        FamilyWeight::Numeric(_) => {
            return Err(Error::InvalidInput(
                "the Fourier check needs an expression weight".into(),
            ))
        }
    };
    // freeze the other variables and move x_var to x1
    let subs: Vec<Expr> = member
        .bounds
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| if i == var { Expr::var(0) } else { Expr::Const(0.5 * (a + b)) })
        .collect();
    let w1 = weight.substitute_vars(&subs);
    let (a, b) = member.bounds[var];
    let x1 = a;
    let x = member.scale;
    let kmax = check.max_deriv;
    // integration-by-parts bounds from jets of x^k w
    let mut bounds = Vec::with_capacity(kmax + 1);
    for k in 0..=kmax {
        let xk_w = Expr::var(0).powf(k as f64) * w1.clone();
        let n = 512;
        let h = (b - a) / n as f64;
        let mut s = 0.0;
        for i in 0..n {
            let p = a + (i as f64 + 0.5) * h;
            let j = crate::eval::jet_of(&xk_w, 0, &[p], &Params::new(), k)?;
            s += j.deriv(k)?.norm() * h;
        }
        bounds.push(s / x1);
    }
    let theta = Expr::param("theta");
    let phase = Expr::Const(-2.0 * std::f64::consts::PI) * theta * Expr::var(0);
    let rows: Vec<FourierRow> = check
        .grid
        .iter()
        .map(|&t| {
            let p = Params::new().with("theta", t);
            let mut scaled = Vec::with_capacity(kmax + 1);
            let mut value = C64::new(0.0, 0.0);
            let mut error_estimate = 0.0;
            for k in 0..=kmax {
                // ∂_t^k of the transform: weight times (-2πi x)^k
                let factor = Expr::Const(-2.0 * std::f64::consts::PI) * Expr::Imag * Expr::var(0);
                let wk = (0..k).fold(w1.clone(), |acc, _| acc * factor.clone());
                let spec = IntegralSpec::new(phase.clone(), wk, vec![(a, b)], p.clone());
                let r = quad1d(&spec, check.tol)?;
                if k == 0 {
                    value = r.value / x1;
                    error_estimate = r.error_estimate / x1;
                }
                scaled.push(t.abs().powi(k as i32) * r.value.norm() / x1);
            }
            Ok(FourierRow {
                t,
                value,
                error_estimate,
                envelope: (1.0 + t.abs() * x1 / x).powf(-check.a),
                scaled_derivs: scaled,
                beyond_threshold: t.abs() >= check.q.powf(check.eps) * x / x1,
            })
        })
        .collect::<Result<_>>()?;
    let derivative_bounds_hold = rows.iter().all(|r| {
        r.scaled_derivs
            .iter()
            .zip(&bounds)
            .all(|(d, bnd)| *d <= bnd * (1.0 + 1e-6) + 1e-12)
    });
    // tail fit on points resolved well above the quadrature error
    let tail: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.t.abs() * x1 / x >= 1.0 && r.value.norm() > 100.0 * r.error_estimate.max(1e-300))
        .map(|r| ((1.0 + r.t.abs() * x1 / x).ln(), r.value.norm().ln()))
        .collect();
    let fitted_exponent = if tail.len() >= 2 {
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let sxy: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
        let sxx: f64 = tail.iter().map(|p| (p.0 - mx).powi(2)).sum();
        (sxx > 0.0).then(|| -sxy / sxx)
    } else {
        None
    };
    let peak = rows
        .iter()
        .fold((f64::NAN, -1.0), |acc, r| if r.value.norm() > acc.1 { (r.t, r.value.norm()) } else { acc })
        .0;
    Ok(FourierReport {
        tail_points: tail.len(),
        rows,
        bounds,
        derivative_bounds_hold,
        fitted_exponent,
        peak,
        support_scale: x1,
        scale: x,
    })
}
