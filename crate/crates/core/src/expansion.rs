//! The stationary-phase expansion
//!
//! `∫ w(t) e^{iφ(t)} dt ≈ e^{iφ(t₀)} φ''(t₀)^{-1/2} Σ_n c_n φ''(t₀)^{-n} G^{(2n)}(t₀)`
//!
//! with `G = w·e^{iH}` and `H` the phase minus its second-order Taylor
//! polynomial at `t₀`, and the normalised output weight
//! `W = (√Y/Z)·φ''^{-1/2}·Σ_n ...` as a function of the spectator variables.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use crate::error::{Error, Result};
use crate::eval::SeriesFn;
use crate::jet::{factorial, Jet};
use crate::mjet::MJet;
use crate::series::{Series, C64, ONE, ZERO};
use crate::stationary::{classify, t0_jet_at, SPContext, StationaryPointForm, StationaryResult};

/// Largest supported number of correction terms.
pub const MAX_TERMS: usize = 10;

/// Relative size allowed for the Taylor coefficients of `H` below order 3.
const H_CHECK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SPConstants {
    pub c: Vec<C64>,
}

/// `c_n = √(2π) e^{iπ/4} (i/2)^n / n!` for `n = 0..=n_max`.
pub fn sp_constants(n_max: usize) -> Result<SPConstants> {
    if n_max > MAX_TERMS {
        return Err(Error::InvalidInput(format!(
            "n_max = {n_max} exceeds the supported {MAX_TERMS}"
        )));
    }
    let c0 = C64::from_polar((2.0 * PI).sqrt(), PI / 4.0);
    let half_i = C64::new(0.0, 0.5);
    let c = (0..=n_max)
        .map(|n| c0 * half_i.powi(n as i32) / factorial(n))
        .collect();
    Ok(SPConstants { c })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExpansionResult {
    pub t0: f64,
    pub phase_at_t0: f64,
    /// `φ''(t₀)`, negative when the expansion was done by conjugation.
    pub phase_dd_at_t0: f64,
    /// `c_n |φ''|^{-n} G^{(2n)}(t₀)`.
    pub terms: Vec<C64>,
    pub main_value: C64,
    pub w_value: C64,
    pub truncation_estimate: f64,
    pub conjugate: bool,
}

fn stationary_point(ctx: &SPContext, spectators: &[f64]) -> Result<(f64, bool)> {
    match classify(ctx, spectators)? {
        StationaryResult::Stationary { t0, conjugate } => Ok((t0, conjugate)),
        other => Err(Error::NotStationary(format!("{other:?}"))),
    }
}

/// `G^{(2n)}(t₀)` for `n ≤ n_max`; `t₀` must be a stationary point of
/// `phase` in the variable `var`.
pub fn g_derivatives(
    phase: &dyn SeriesFn,
    weight: &dyn SeriesFn,
    var: usize,
    t0: f64,
    spectators: &[f64],
    n_max: usize,
) -> Result<Vec<C64>> {
    let mut point = spectators.to_vec();
    point.insert(var, t0);
    let order = 2 * n_max;
    let phi = phase.jet(var, &point, order.max(2))?;
    let w = weight.jet(var, &point, order)?;
    g_from_jets(&phi, &w, n_max, None)
}

/// `G^{(2n)}` from the jets of φ and w at the stationary point. `scale` is
/// the natural size of `φ'`, defaulting to `|φ''|`.
fn g_from_jets(phi: &Jet, w: &Jet, n_max: usize, scale: Option<f64>) -> Result<Vec<C64>> {
    let order = 2 * n_max;
    let c = phi.coeffs();
    let curvature = 2.0 * c[2].norm();
    let scale = scale.unwrap_or(curvature).max(f64::MIN_POSITIVE);
    if c[1].norm() > H_CHECK * scale {
        return Err(Error::AssertionFailure(format!(
            "phase derivative {} at the claimed stationary point (scale {scale:e})",
            c[1]
        )));
    }
    let mut h = vec![ZERO; order + 1];
    for k in 3..=order {
        h[k] = c[k];
    }
    let h = Jet::new(phi.center(), h);
    let g = w.truncate(order).mul(&h.scale(C64::new(0.0, 1.0)).exp());
    Ok((0..=n_max)
        .map(|n| g.coeff(2 * n) * factorial(2 * n))
        .collect())
}

/// Stationary-phase expansion at the spectator values.
pub fn sp_expand(ctx: &SPContext, weight: &dyn SeriesFn, spectators: &[f64], n_max: usize) -> Result<ExpansionResult> {
    let (t0, conjugate) = stationary_point(ctx, spectators)?;
    expand_at(ctx, weight, spectators, n_max, t0, conjugate)
}

/// [`sp_expand`] at a known stationary point.
pub fn expand_at(
    ctx: &SPContext,
    weight: &dyn SeriesFn,
    spectators: &[f64],
    n_max: usize,
    t0: f64,
    conjugate: bool,
) -> Result<ExpansionResult> {
    let consts = sp_constants(n_max)?;
    let point = ctx.point(t0, spectators);
    let order = 2 * n_max;
    let mut phi = ctx.phase.jet(ctx.var, &point, order.max(2))?;
    let mut w = weight.jet(ctx.var, &point, order)?;
    let phase_at_t0 = phi.coeff(0).re;
    let phase_dd_at_t0 = 2.0 * phi.coeff(2).re;
    if conjugate {
        phi = phi.neg();
        w = w.conj();
    }
    let curvature = 2.0 * phi.coeff(2).re;
    let threshold = 1e-10 * ctx.y / (ctx.z * ctx.z);
    if !(curvature >= threshold) {
        return Err(Error::SingularImplicit {
            curvature,
            threshold,
        });
    }
    let natural = (ctx.y / ctx.z).max(curvature * ctx.z);
    let g = g_from_jets(&phi, &w, n_max, Some(natural))?;
    let mut terms: Vec<C64> = g
        .iter()
        .zip(&consts.c)
        .enumerate()
        .map(|(n, (gn, cn))| cn * gn * curvature.powi(-(n as i32)))
        .collect();
    if conjugate {
        for t in terms.iter_mut() {
            *t = t.conj();
        }
    }
    let sum: C64 = terms.iter().sum();
    let root = curvature.sqrt();
    let main_value = C64::from_polar(1.0, phase_at_t0) * sum / root;
    let w_value = ctx.y.sqrt() / ctx.z * sum / root;
    let truncation_estimate = terms[n_max].norm() / root + ctx.z * ctx.r.powi(-(n_max as i32 + 1));
    Ok(ExpansionResult {
        t0,
        phase_at_t0,
        phase_dd_at_t0,
        terms,
        main_value,
        w_value,
        truncation_estimate,
        conjugate,
    })
}

/// The expansion carried out in jet arithmetic over the spectators.
/// All jets are in the `d - 1` spectator variables.
#[derive(Debug, Clone)]
pub struct JetExpansion {
    pub t0: MJet,
    /// `φ(t₀(s), s)`.
    pub phase: MJet,
    /// `φ''(t₀(s), s)` (of `-φ` under conjugation).
    pub phase_dd: MJet,
    pub terms: Vec<MJet>,
    /// `φ''^{-1/2} Σ terms`.
    pub amplitude: MJet,
}

/// Runs the expansion with `t₀` given as a jet in the spectators; the
/// order of that jet is the order of every output jet.
pub fn expand_mjet(
    phase: &dyn SeriesFn,
    weight: &dyn SeriesFn,
    var: usize,
    t0: &MJet,
    conjugate: bool,
    n_max: usize,
) -> Result<JetExpansion> {
    let consts = sp_constants(n_max)?;
    let n = t0.order();
    // φ'' along the path needs two orders in u even when n_max = 0
    let order = 2 * n_max.max(1) + n;
    let s0 = t0.center();
    let mut center = s0.to_vec();
    center.insert(var, 0.0);
    let d = center.len();
    let u = MJet::variable(&center, var, order);
    let inputs: Vec<MJet> = (0..d)
        .map(|i| {
            if i == var {
                t0.resize(order).insert_var(var, 0.0).add(&u)
            } else {
                MJet::variable(&center, i, order)
            }
        })
        .collect();
    let mut phi = phase.series(&inputs)?;
    let mut w = weight.series(&inputs)?;
    if conjugate {
        phi = phi.neg();
        w = w.conj();
    }
    let phi0 = phi.slice(var, 0);
    let phi1 = phi.slice(var, 1);
    let phi2 = phi.slice(var, 2);
    let curvature = 2.0 * phi2.value().re;
    if !(curvature > 0.0) {
        return Err(Error::SingularImplicit {
            curvature,
            threshold: 0.0,
        });
    }
    let drift = phi1.truncate(n).coeffs().iter().map(|c| c.norm()).fold(0.0, f64::max);
    if drift > H_CHECK * curvature * (1.0 + t0.value().norm()) {
        return Err(Error::AssertionFailure(format!(
            "phase derivative along the stationary point is {drift:e}"
        )));
    }
    let h = phi
        .sub(&phi0.resize(order))
        .sub(&phi1.resize(order).mul(&u))
        .sub(&phi2.resize(order).mul(&u).mul(&u));
    let g = w.mul(&h.scale(C64::new(0.0, 1.0)).exp());
    let phase_dd = phi2.scale(C64::new(2.0, 0.0)).truncate(n).drop_var(var);
    let inv = phase_dd.powf(-1.0)?;
    let mut terms = Vec::with_capacity(n_max + 1);
    let mut power = phase_dd.lift(ONE);
    for (k, ck) in consts.c.iter().enumerate() {
        let gk = g.slice(var, 2 * k).truncate(n).drop_var(var).scale(C64::new(factorial(2 * k), 0.0));
        terms.push(gk.mul(&power).scale(*ck));
        power = power.mul(&inv);
    }
    let mut sum = terms[0].lift(ZERO);
    for t in &terms {
        sum = sum.add(t);
    }
    let mut amplitude = sum.mul(&phase_dd.powf(-0.5)?);
    let mut phase0 = phi0.truncate(n).drop_var(var);
    if conjugate {
        amplitude = amplitude.conj();
        terms = terms.iter().map(|t| t.conj()).collect();
        phase0 = phase0.neg();
    }
    Ok(JetExpansion {
        t0: t0.clone(),
        phase: phase0,
        phase_dd,
        terms,
        amplitude,
    })
}

/// How a step locates its stationary point.
#[derive(Debug, Clone, PartialEq)]
pub enum T0Source {
    /// Classification and implicit differentiation at each spectator point.
    Implicit,
    Monomial(StationaryPointForm),
}

type CacheKey = (Vec<u64>, usize);

/// The numeric family `s ↦ W(s)` produced by one stationary-phase step,
/// with jets in the spectators on demand (memoised per point and order).
pub struct WeightOut {
    ctx: SPContext,
    weight: Arc<dyn SeriesFn>,
    n_max: usize,
    source: T0Source,
    normalization: f64,
    cache: Mutex<HashMap<CacheKey, Option<Arc<JetExpansion>>>>,
}

impl WeightOut {
    pub fn new(ctx: SPContext, weight: Arc<dyn SeriesFn>, n_max: usize, source: T0Source) -> Result<Self> {
        if weight.dim() > ctx.dim() {
            return Err(Error::InvalidInput(format!(
                "weight has {} variables but the phase {}",
                weight.dim(),
                ctx.dim()
            )));
        }
        sp_constants(n_max)?;
        let normalization = ctx.y.sqrt() / ctx.z;
        Ok(WeightOut {
            ctx,
            weight,
            n_max,
            source,
            normalization,
            cache: Mutex::new(HashMap::new()),
        })
    }

    pub fn context(&self) -> &SPContext {
        &self.ctx
    }

    /// `√Y/Z`, the factor between `W` and the amplitude.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// The expansion at `s` to spectator order `order`; `None` where the
    /// phase has no stationary point on the interval (the slice integral is
    /// negligible there and `W` is taken to vanish).
    pub fn expansion(&self, s: &[f64], order: usize) -> Result<Option<Arc<JetExpansion>>> {
        let key = (s.iter().map(|x| x.to_bits()).collect(), order);
        if let Some(hit) = self.cache.lock().unwrap_or_else(|e| e.into_inner()).get(&key) {
            return Ok(hit.clone());
        }
        let computed = self.compute(s, order)?.map(Arc::new);
        self.cache
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(key, computed.clone());
        Ok(computed)
    }

    fn compute(&self, s: &[f64], order: usize) -> Result<Option<JetExpansion>> {
        let (t0, conjugate) = match &self.source {
            T0Source::Implicit => match classify(&self.ctx, s)? {
                StationaryResult::Stationary { t0, conjugate } => {
                    (t0_jet_at(&self.ctx, t0, s, order)?, conjugate)
                }
                StationaryResult::NonStationary { .. } => return Ok(None),
                StationaryResult::Indeterminate(reason) => return Err(Error::NotStationary(reason)),
            },
            T0Source::Monomial(form) => {
                let t0 = form.mjet(s, order)?;
                let point = self.ctx.point(t0.value().re, s);
                let j = self.ctx.phase.jet(self.ctx.var, &point, 2)?;
                (t0, j.coeff(2).re < 0.0)
            }
        };
        let e = expand_mjet(
            self.ctx.phase.as_ref(),
            self.weight.as_ref(),
            self.ctx.var,
            &t0,
            conjugate,
            self.n_max,
        )?;
        Ok(Some(e))
    }

    /// Jet of the normalised weight `W` at `s`.
    pub fn w_mjet(&self, s: &[f64], order: usize) -> Result<MJet> {
        Ok(match self.expansion(s, order)? {
            Some(e) => e.amplitude.scale(C64::new(self.normalization, 0.0)),
            None => MJet::constant(s, order, ZERO),
        })
    }

    /// Jet of the new phase `φ(t₀(s), s)` at `s`.
    pub fn phase_mjet(&self, s: &[f64], order: usize) -> Result<MJet> {
        match self.expansion(s, order)? {
            Some(e) => Ok(e.phase.clone()),
            None => Err(Error::NotStationary(format!(
                "no stationary point at spectators {s:?}"
            ))),
        }
    }
}

/// The output weight of one step as a function family over the spectators.
pub fn weight_out(ctx: &SPContext, weight: Arc<dyn SeriesFn>, n_max: usize) -> Result<Arc<WeightOut>> {
    Ok(Arc::new(WeightOut::new(ctx.clone(), weight, n_max, T0Source::Implicit)?))
}

/// `W` as a [`SeriesFn`] of the spectators.
pub struct WeightFamily(pub Arc<WeightOut>);

/// `φ(t₀(s), s)` as a [`SeriesFn`] of the spectators.
pub struct PhaseFamily(pub Arc<WeightOut>);

fn compose_at(inputs: &[MJet], own: impl Fn(&[f64], usize) -> Result<MJet>) -> Result<MJet> {
    let Some(first) = inputs.first() else {
        return Err(Error::InvalidInput("no inputs".into()));
    };
    let at: Vec<f64> = inputs.iter().map(|j| j.value().re).collect();
    own(&at, first.order())?.substitute(inputs)
}

fn lower_dim(out: &WeightOut) -> usize {
    out.ctx.dim() - 1
}

impl SeriesFn for WeightFamily {
    fn dim(&self) -> usize {
        lower_dim(&self.0)
    }

    fn value(&self, x: &[f64]) -> Result<C64> {
        Ok(self.0.w_mjet(x, 0)?.value())
    }

    fn series(&self, inputs: &[MJet]) -> Result<MJet> {
        compose_at(inputs, |s, k| self.0.w_mjet(s, k))
    }

    fn mjet(&self, x: &[f64], order: usize) -> Result<MJet> {
        self.0.w_mjet(x, order)
    }
}

impl SeriesFn for PhaseFamily {
    fn dim(&self) -> usize {
        lower_dim(&self.0)
    }

    fn value(&self, x: &[f64]) -> Result<C64> {
        Ok(self.0.phase_mjet(x, 0)?.value())
    }

    fn series(&self, inputs: &[MJet]) -> Result<MJet> {
        compose_at(inputs, |s, k| self.0.phase_mjet(s, k))
    }

    fn mjet(&self, x: &[f64], order: usize) -> Result<MJet> {
        self.0.phase_mjet(x, order)
    }
}
