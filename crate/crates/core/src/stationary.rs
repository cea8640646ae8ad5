//! Stationary points of a phase in one active variable: classification on
//! an interval, closed-form monomial stationary points, and the Taylor jet
//! of an implicitly defined stationary point in the spectator variables.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::eval::{BoundExpr, SeriesFn};
use crate::expr::{Expr, Params};
use crate::mjet::{MJet, MultiIndex};
use crate::series::{Series, C64};

/// Grid points used by [`classify`].
pub const GRID_POINTS: usize = 64;

/// Newton iterations allowed before giving up.
pub const MAX_NEWTON: usize = 100;

/// The frame of one stationary-phase application: a phase in `d`
/// variables, the active variable, the interval it ranges over and the
/// scales `Z, Y, X, R`.
#[derive(Clone)]
pub struct SPContext {
    pub phase: Arc<dyn SeriesFn>,
    pub var: usize,
    pub interval: (f64, f64),
    pub z: f64,
    pub y: f64,
    pub x: f64,
    pub r: f64,
    /// `X_2, ..., X_d`: support scales of the spectator variables.
    pub spectator_scales: Vec<f64>,
}

impl std::fmt::Debug for SPContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SPContext")
            .field("var", &self.var)
            .field("interval", &self.interval)
            .field("z", &self.z)
            .field("y", &self.y)
            .field("x", &self.x)
            .field("r", &self.r)
            .finish()
    }
}

impl SPContext {
    /// Context on the dyadic interval `[z, 2z]`. Requires `y/x² ≥ r ≥ 1`.
    pub fn new(phase: Arc<dyn SeriesFn>, var: usize, z: f64, y: f64, x: f64, r: f64) -> Result<Self> {
        if !(z > 0.0 && y > 0.0 && x > 0.0) {
            return Err(Error::InvalidInput(format!(
                "scales must be positive (Z = {z}, Y = {y}, X = {x})"
            )));
        }
        if !(r >= 1.0 && y / (x * x) >= r * (1.0 - 1e-12)) {
            return Err(Error::InvalidInput(format!(
                "need Y/X^2 >= R >= 1, got Y/X^2 = {}, R = {r}",
                y / (x * x)
            )));
        }
        let d = phase.dim();
        if var >= d {
            return Err(Error::InvalidInput(format!(
                "active variable x{} but the phase has {d} variables",
                var + 1
            )));
        }
        Ok(SPContext {
            phase,
            var,
            interval: (z, 2.0 * z),
            z,
            y,
            x,
            r,
            spectator_scales: vec![1.0; d - 1],
        })
    }

    /// Context for an expression phase with `R = Y/X²`.
    pub fn from_expr(phase: &Expr, params: &Params, dim: usize, var: usize, z: f64, y: f64, x: f64) -> Result<Self> {
        let bound = BoundExpr::new(phase, params, dim)?;
        SPContext::new(Arc::new(bound), var, z, y, x, (y / (x * x)).max(1.0))
    }

    pub fn with_interval(mut self, a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInput(format!("bad interval [{a}, {b}]")));
        }
        self.interval = (a, b);
        Ok(self)
    }

    pub fn with_spectator_scales(mut self, scales: Vec<f64>) -> Self {
        self.spectator_scales = scales;
        self
    }

    pub fn dim(&self) -> usize {
        self.phase.dim()
    }

    /// The full point with `t` in the active slot.
    pub fn point(&self, t: f64, spectators: &[f64]) -> Vec<f64> {
        let mut p = spectators.to_vec();
        p.insert(self.var, t);
        p
    }

    fn check_spectators(&self, spectators: &[f64]) -> Result<()> {
        if spectators.len() + 1 != self.dim() {
            return Err(Error::InvalidInput(format!(
                "expected {} spectator values, got {}",
                self.dim() - 1,
                spectators.len()
            )));
        }
        Ok(())
    }

    /// `(φ', φ'')` in the active variable.
    fn derivs(&self, t: f64, spectators: &[f64]) -> Result<(f64, f64)> {
        let j = self.phase.jet(self.var, &self.point(t, spectators), 2)?;
        Ok((j.coeff(1).re, 2.0 * j.coeff(2).re))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum StationaryResult {
    /// A unique interior stationary point. `conjugate` is set when
    /// `φ'' < 0` on the interval, in which case the expansion is carried out
    /// for `-φ` and conjugated.
    Stationary { t0: f64, conjugate: bool },
    /// `φ'` keeps one sign; the grid minimum of `|φ'|`.
    NonStationary { min_abs_phase_deriv: f64 },
    Indeterminate(String),
}

impl StationaryResult {
    pub fn t0(&self) -> Option<f64> {
        match self {
            StationaryResult::Stationary { t0, .. } => Some(*t0),
            _ => None,
        }
    }
}

/// Classifies the phase on the context interval at the given spectator
/// values.
pub fn classify(ctx: &SPContext, spectators: &[f64]) -> Result<StationaryResult> {
    classify_on(ctx, spectators, GRID_POINTS)
}

/// [`classify`] on a grid of `n ≥ 2` points including both endpoints.
pub fn classify_on(ctx: &SPContext, spectators: &[f64], n: usize) -> Result<StationaryResult> {
    ctx.check_spectators(spectators)?;
    let n = n.max(2);
    let (a, b) = ctx.interval;
    let mut grid = Vec::with_capacity(n);
    for i in 0..n {
        let t = if i + 1 == n {
            b
        } else {
            a + (b - a) * i as f64 / (n - 1) as f64
        };
        let (d1, d2) = ctx.derivs(t, spectators)?;
        grid.push((t, d1, d2));
    }
    let changes: Vec<usize> = (0..n - 1)
        .filter(|&i| grid[i].1.signum() != grid[i + 1].1.signum() || grid[i].1 == 0.0)
        .collect();
    if changes.is_empty() && grid[n - 1].1 != 0.0 {
        let min = grid.iter().map(|g| g.1.abs()).fold(f64::INFINITY, f64::min);
        return Ok(StationaryResult::NonStationary {
            min_abs_phase_deriv: min,
        });
    }
    let convex = grid.iter().all(|g| g.2 > 0.0);
    let concave = grid.iter().all(|g| g.2 < 0.0);
    if !(convex || concave) {
        return Ok(StationaryResult::Indeterminate(
            "phi'' vanishes or changes sign on the interval".into(),
        ));
    }
    // φ' is strictly monotone, so there is exactly one sign change
    let sign = if convex { 1.0 } else { -1.0 };
    let i = changes.first().copied().unwrap_or(n - 2);
    let (mut lo, mut hi) = (grid[i].0, grid[i + 1].0);
    let (f_lo, f_hi) = (sign * grid[i].1, sign * grid[i + 1].1);
    let tol = 1e-12 * ctx.y / ctx.z;
    let mut t = if f_hi > f_lo {
        (lo - f_lo * (hi - lo) / (f_hi - f_lo)).clamp(lo, hi)
    } else {
        0.5 * (lo + hi)
    };
    let mut converged = false;
    for _ in 0..MAX_NEWTON {
        let (d1, d2) = ctx.derivs(t, spectators)?;
        let (f, fp) = (sign * d1, sign * d2);
        if f.abs() <= tol {
            converged = true;
            break;
        }
        if f < 0.0 {
            lo = t;
        } else {
            hi = t;
        }
        if hi - lo <= 4.0 * f64::EPSILON * t.abs().max(f64::MIN_POSITIVE) {
            // bracket at machine resolution
            converged = true;
            break;
        }
        let newton = t - f / fp;
        t = if fp > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    if !converged {
        return Err(Error::NoConvergence {
            iterations: MAX_NEWTON,
        });
    }
    let margin = 1e-6 * ctx.z;
    if t - a < margin || b - t < margin {
        return Ok(StationaryResult::Indeterminate(format!(
            "stationary point {t} is at the edge of [{a}, {b}]"
        )));
    }
    Ok(StationaryResult::Stationary {
        t0: t,
        conjugate: concave,
    })
}

/// A stationary point of the closed form `c · s_1^{α_1} ··· s_{d-1}^{α_{d-1}}`
/// in the spectator variables.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryPointForm {
    pub c: f64,
    pub exponents: Vec<f64>,
}

/// Closed-form monomial stationary point.
pub fn t0_monomial(c: f64, exponents: &[f64]) -> Result<StationaryPointForm> {
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::domain("monomial stationary point", c));
    }
    Ok(StationaryPointForm {
        c,
        exponents: exponents.to_vec(),
    })
}

impl StationaryPointForm {
    pub fn value(&self, spectators: &[f64]) -> Result<f64> {
        let mut v = self.c;
        for (&s, &e) in spectators.iter().zip(&self.exponents) {
            if e != 0.0 {
                if s <= 0.0 {
                    return Err(Error::domain("monomial stationary point", s));
                }
                v *= s.powf(e);
            }
        }
        Ok(v)
    }

    /// Exact jet in the spectators.
    pub fn mjet(&self, spectators: &[f64], order: usize) -> Result<MJet> {
        let mut acc = MJet::constant(spectators, order, C64::new(self.c, 0.0));
        for (i, &e) in self.exponents.iter().enumerate() {
            if e != 0.0 {
                acc = acc.mul(&MJet::variable(spectators, i, order).powf(e)?);
            }
        }
        Ok(acc)
    }

    /// The stationary point as an expression; `slot(i)` is the variable
    /// index of the i-th spectator.
    pub fn expr(&self, slot: impl Fn(usize) -> usize) -> Expr {
        let mut e = Expr::Const(self.c);
        for (i, &p) in self.exponents.iter().enumerate() {
            if p != 0.0 {
                e = e * Expr::var(slot(i)).powf(p);
            }
        }
        e
    }
}

/// Jet of the implicit stationary point `t₀(s)` in the spectators at
/// `spectators`, from `∂φ(t₀(s), s) ≡ 0` solved one total degree at a time.
pub fn t0_jet(ctx: &SPContext, spectators: &[f64], order: usize) -> Result<MJet> {
    let t0 = match classify(ctx, spectators)? {
        StationaryResult::Stationary { t0, .. } => t0,
        other => return Err(Error::NotStationary(format!("{other:?}"))),
    };
    t0_jet_at(ctx, t0, spectators, order)
}

/// [`t0_jet`] with a known stationary point.
pub fn t0_jet_at(ctx: &SPContext, t0: f64, spectators: &[f64], order: usize) -> Result<MJet> {
    ctx.check_spectators(spectators)?;
    let var = ctx.var;
    let f = ctx.phase.mjet(&ctx.point(t0, spectators), order.max(1) + 1)?.partial(var);
    let curvature = f.coeff(&MultiIndex::axis(ctx.dim(), var, 1)).re;
    let threshold = 1e-10 * ctx.y / (ctx.z * ctx.z);
    if !(curvature.abs() >= threshold) {
        return Err(Error::SingularImplicit {
            curvature: curvature.abs(),
            threshold,
        });
    }
    let s: Vec<MJet> = (0..spectators.len())
        .map(|i| MJet::variable(spectators, i, order))
        .collect();
    let mut t = MJet::constant(spectators, order, C64::new(t0, 0.0));
    for m in 1..=order {
        let mut inner = s.clone();
        inner.insert(var, t.clone());
        let residual = f.substitute(&inner)?;
        t = MJet::from_fn(spectators, order, |a| {
            let c = t.coeff(a);
            if a.degree() as usize == m {
                c - residual.coeff(a) / curvature
            } else {
                c
            }
        });
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;
    use proptest::prelude::*;

    fn ctx(phase: &str, params: Params, dim: usize, var: usize, z: f64, y: f64) -> SPContext {
        SPContext::from_expr(&parse_expr(phase).unwrap(), &params, dim, var, z, y, 1.0).unwrap()
    }

    #[test]
    fn vertex_of_quadratic() {
        let c = ctx("7*(x1-1.5)^2", Params::new(), 1, 0, 1.0, 7.0);
        match classify(&c, &[]).unwrap() {
            StationaryResult::Stationary { t0, conjugate } => {
                assert!((t0 - 1.5).abs() < 1e-14);
                assert!(!conjugate);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn linear_phase_is_non_stationary() {
        let lambda = 30.0;
        let c = ctx("lambda*x1", Params::new().with("lambda", lambda), 1, 0, 1.0, lambda);
        match classify(&c, &[]).unwrap() {
            StationaryResult::NonStationary { min_abs_phase_deriv } => {
                assert!((min_abs_phase_deriv - lambda).abs() < 1e-12)
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn concave_phase_is_conjugated() {
        let c = ctx("-(3*(x1-1.2)^2)", Params::new(), 1, 0, 1.0, 3.0);
        assert!(matches!(
            classify(&c, &[]).unwrap(),
            StationaryResult::Stationary { conjugate: true, .. }
        ));
    }

    #[test]
    fn inflection_is_indeterminate() {
        let c = ctx("(x1-1.5)^3 - 0.01*x1", Params::new(), 1, 0, 1.0, 1.0);
        assert!(matches!(
            classify(&c, &[]).unwrap(),
            StationaryResult::Indeterminate(_)
        ));
    }

    #[test]
    fn endpoint_is_indeterminate() {
        let c = ctx("(x1-1)^2", Params::new(), 1, 0, 1.0, 1.0);
        assert!(matches!(
            classify(&c, &[]).unwrap(),
            StationaryResult::Indeterminate(_)
        ));
    }

    #[test]
    fn second_step_of_the_three_variable_example() {
        // x2 phase after eliminating x3 (e(.) normalisation dropped)
        let params = Params::new()
            .with("l1", 90.0)
            .with("l2", 110.0)
            .with("l3", 100.0)
            .with("X2", 1.0)
            .with("X3", 1.0);
        let phase = "x2*l2 + 2*sqrt(l1*l3*x1*X2*X3/x2)";
        let c = ctx(phase, params, 2, 1, 0.5, 100.0);
        let x1 = 1.3;
        let t0 = classify(&c, &[x1]).unwrap().t0().unwrap();
        let expect = (90.0 * 100.0 * x1 / (110.0f64 * 110.0)).powf(1.0 / 3.0);
        assert!((t0 - expect).abs() < 1e-12 * expect, "{t0} vs {expect}");
    }

    #[test]
    fn monomial_forms() {
        let one = t0_monomial(1.0, &[0.0, 0.0]).unwrap();
        let j = one.mjet(&[1.2, 0.7], 4).unwrap();
        assert_eq!(j.value(), C64::new(1.0, 0.0));
        assert!(j.coeffs()[1..].iter().all(|c| *c == C64::new(0.0, 0.0)));
        assert!(t0_monomial(-1.0, &[]).is_err());
        let f = t0_monomial(2.0, &[0.5, -0.5]).unwrap();
        assert!((f.value(&[4.0, 9.0]).unwrap() - 2.0 * 2.0 / 3.0).abs() < 1e-15);
        let e = f.expr(|i| i + 1);
        let v = crate::eval::eval(&e, &[0.0, 4.0, 9.0], &Params::new()).unwrap();
        assert!((v.re - 4.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn shifted_quadratic_tracks_the_shift() {
        // φ = (t - s²)², t₀ = s² exactly
        let c = ctx("(x1 - x2^2)^2", Params::new(), 2, 0, 0.5, 1.0);
        let s = 0.9;
        let j = t0_jet(&c, &[s], 6).unwrap();
        let expect = [s * s, 2.0 * s, 1.0, 0.0, 0.0, 0.0, 0.0];
        for (k, e) in expect.iter().enumerate() {
            let got = j.coeff(&MultiIndex(vec![k as u32]));
            assert!((got.re - e).abs() < 1e-12, "order {k}: {got} vs {e}");
        }
    }

    #[test]
    fn first_order_is_ratio_of_partials() {
        let c = ctx("x1^3/3 - x1*x2*x3 - 0.1*x2^2*x1", Params::new(), 3, 0, 0.6, 1.0);
        let s = [1.1, 0.8];
        let t0 = classify(&c, &s).unwrap().t0().unwrap();
        let j = t0_jet(&c, &s, 3).unwrap();
        assert!((j.value().re - t0).abs() < 1e-10 * t0);
        // φ_t = t² - x2 x3 - 0.1 x2²; ∂/∂x2 = -x3 - 0.2 x2, ∂/∂x3 = -x2, ∂/∂t = 2t
        let f1 = 2.0 * t0;
        let d2 = -(-s[1] - 0.2 * s[0]) / f1;
        let d3 = -(-s[0]) / f1;
        assert!((j.coeff(&MultiIndex(vec![1, 0])).re - d2).abs() < 1e-13);
        assert!((j.coeff(&MultiIndex(vec![0, 1])).re - d3).abs() < 1e-13);
    }

    #[test]
    fn flat_stationary_point_is_singular() {
        let c = ctx("(x1-1.5)^4 + x2*x1", Params::new(), 2, 0, 1.0, 1.0);
        assert!(matches!(
            t0_jet_at(&c, 1.5, &[0.0], 2),
            Err(Error::SingularImplicit { .. })
        ));
    }

    proptest! {
        #[test]
        fn implicit_jet_matches_monomial(
            a in 0.5f64..2.0,
            b in 0.5f64..2.0,
            lam in 50.0f64..200.0,
            x1 in 0.7f64..1.4,
            x2 in 0.7f64..1.4,
        ) {
            // φ = λ₃x₃ + a·b·x₁/(x₂x₃) has t₀ = (a·b·x₁/(λ x₂))^{1/2}
            let params = Params::new().with("a", a).with("b", b).with("lam", lam);
            let c = ctx("lam*x3 + a*b*x1/(x2*x3)", params, 3, 2, 0.05, lam)
                .with_interval(0.01, 1.0).unwrap();
            let s = [x1, x2];
            let numeric = t0_jet(&c, &s, 4).unwrap();
            let exact = t0_monomial((a * b / lam).sqrt(), &[0.5, -0.5]).unwrap().mjet(&s, 4).unwrap();
            for (u, v) in numeric.coeffs().iter().zip(exact.coeffs()) {
                prop_assert!((u - v).norm() <= 1e-8 * v.norm().max(exact.value().norm()));
            }
        }

        #[test]
        fn bracket_and_newton_agree(c0 in 1.1f64..1.9, k in 0.0f64..0.2) {
            // strictly convex: φ'' = 2 + 6k(t - c0) > 0 on [1, 2]
            let params = Params::new().with("c", c0).with("k", k);
            let c = ctx("(x1-c)^2 + k*(x1-c)^3", params, 1, 0, 1.0, 1.0);
            let t0 = classify(&c, &[]).unwrap().t0().unwrap();
            prop_assert!((t0 - c0).abs() <= 1e-10 * c0);
        }
    }
}
