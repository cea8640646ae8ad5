//! Brute-force reference values for oscillatory integrals
//! `∫_box w(x) e^{iφ(x)} dx` in one to three dimensions.
//!
//! One-dimensional integrals use adaptive Gauss–Kronrod panels no wider
//! than a quarter period of the fastest oscillation found on a scan grid.
//! Multi-dimensional integrals are iterated: the innermost variable uses
//! Filon panels (exact in the linear part of the phase), the outer
//! variables adaptive Gauss–Kronrod starting from eight panels.
//!
//! Every adaptive pass evaluates its panels (in parallel at the top level)
//! and reduces them in index order, so results do not depend on the thread
//! count.

mod filon;
mod gk;

use rayon::prelude::*;

use crate::compile::Program;
use crate::error::{Error, Result};
use crate::eval::jet_of;
use crate::expr::{Expr, Params};
use crate::series::C64;

/// Panel budget per adaptive integration.
pub const MAX_PANELS: usize = 10_000_000;

/// Roundoff floor for one-dimensional integrals, relative to `∫|f|`.
const L1_FLOOR_1D: f64 = 1e-14;

/// Panel errors below this are accepted outright; weights decaying into
/// the subnormal range would otherwise be refined without end.
const NEGLIGIBLE: f64 = 1e-280;

/// Rounding error of an evaluated phase, in ulps of its magnitude.
const PHASE_ULPS: f64 = 4.0;

/// Points in the scan that sizes the initial panels.
const SCAN_POINTS: usize = 1024;

/// An oscillatory integral `∫_box w(x) e^{iφ(x)} dx`, phase in radians.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralSpec {
    pub phase: Expr,
    pub weight: Expr,
    pub bounds: Vec<(f64, f64)>,
    pub params: Params,
}

impl IntegralSpec {
    pub fn new(phase: Expr, weight: Expr, bounds: Vec<(f64, f64)>, params: Params) -> Self {
        IntegralSpec {
            phase,
            weight,
            bounds,
            params,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    fn compiled(&self) -> Result<(Program, Program)> {
        let phase = Program::compile(&self.phase.bind(&self.params)?)?;
        if !phase.is_real() {
            return Err(Error::InvalidInput("the phase must be real-valued".into()));
        }
        let weight = Program::compile(&self.weight.bind(&self.params)?)?;
        Ok((phase, weight))
    }

    fn check(&self) -> Result<()> {
        for &(a, b) in &self.bounds {
            if !(a.is_finite() && b.is_finite() && a < b) {
                return Err(Error::InvalidInput(format!("bad integration interval [{a}, {b}]")));
            }
        }
        let d = self.dim();
        if self.phase.arity() > d || self.weight.arity() > d {
            return Err(Error::InvalidInput(format!(
                "integrand uses more than {d} variables"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleResult {
    pub value: C64,
    pub error_estimate: f64,
    pub panels_used: usize,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct PanelEval {
    pub value: C64,
    pub err: f64,
    /// `∫|f|` over the panel.
    pub abs: f64,
    /// Integrated error of the integrand values themselves.
    pub noise: f64,
}

struct Adaptive {
    tol: f64,
    l1_floor: f64,
    parallel: bool,
}

impl Adaptive {
    /// Generation-wise bisection: every pass evaluates all open panels,
    /// accepts those whose error is below their share of the global target,
    /// and splits the rest.
    fn run(
        &self,
        rule: impl Fn(f64, f64) -> Result<PanelEval> + Sync,
        a: f64,
        b: f64,
        initial: usize,
    ) -> Result<(PanelEval, usize)> {
        let width = b - a;
        let n0 = initial.max(1);
        let mut open: Vec<(f64, f64)> = (0..n0)
            .map(|i| {
                let lo = a + width * i as f64 / n0 as f64;
                let hi = if i + 1 == n0 {
                    b
                } else {
                    a + width * (i + 1) as f64 / n0 as f64
                };
                (lo, hi)
            })
            .collect();
        let mut done: Vec<(f64, PanelEval)> = Vec::new();
        let mut used = 0usize;
        while !open.is_empty() {
            used += open.len();
            if used > MAX_PANELS {
                return Err(Error::QuadratureFailure(format!(
                    "panel budget of {MAX_PANELS} exceeded on [{a}, {b}]"
                )));
            }
            let evals: Vec<PanelEval> = if self.parallel && open.len() >= 8 {
                open.par_iter().map(|&(lo, hi)| rule(lo, hi)).collect::<Result<_>>()?
            } else {
                open.iter().map(|&(lo, hi)| rule(lo, hi)).collect::<Result<_>>()?
            };
            let mut total = C64::new(0.0, 0.0);
            let mut l1 = 0.0;
            for (_, p) in &done {
                total += p.value;
                l1 += p.abs;
            }
            for p in &evals {
                if !(p.value.re.is_finite() && p.value.im.is_finite()) {
                    return Err(Error::QuadratureFailure("non-finite integrand value".into()));
                }
                total += p.value;
                l1 += p.abs;
            }
            let density = (self.tol * total.norm()).max(self.l1_floor * l1) / width;
            let mut next = Vec::new();
            for (&(lo, hi), p) in open.iter().zip(evals) {
                let mid = 0.5 * (lo + hi);
                let unsplittable = !(lo < mid && mid < hi);
                // refining cannot beat the error of the integrand values
                let resolved = p.err <= density * (hi - lo) || p.err <= 4.0 * p.noise;
                if resolved || p.err < NEGLIGIBLE || unsplittable {
                    done.push((lo, p));
                } else {
                    next.push((lo, mid));
                    next.push((mid, hi));
                }
            }
            open = next;
        }
        done.sort_by(|x, y| x.0.total_cmp(&y.0));
        let mut sum = PanelEval {
            value: C64::new(0.0, 0.0),
            err: 0.0,
            abs: 0.0,
            noise: 0.0,
        };
        for (_, p) in &done {
            sum.value += p.value;
            sum.err += p.err;
            sum.abs += p.abs;
            sum.noise += p.noise;
        }
        Ok((sum, used))
    }
}

/// Largest `|∂φ/∂x_var|` on a uniform scan of `[a, b]` with the other
/// coordinates fixed at `point`.
fn scan_max_slope(phase: &Expr, var: usize, point: &[f64], a: f64, b: f64) -> Result<f64> {
    let mut p = point.to_vec();
    let mut max = 0.0f64;
    for i in 0..SCAN_POINTS {
        p[var] = a + (b - a) * (i as f64 + 0.5) / SCAN_POINTS as f64;
        let j = jet_of(phase, var, &p, &Params::new(), 1)?;
        max = max.max(j.coeff(1).norm());
    }
    Ok(max)
}

/// One-dimensional oracle.
pub fn quad1d(spec: &IntegralSpec, tol: f64) -> Result<OracleResult> {
    if spec.dim() != 1 {
        return Err(Error::InvalidInput(format!(
            "quad1d needs a one-dimensional integral, got d = {}",
            spec.dim()
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    spec.check()?;
    let (phase, weight) = spec.compiled()?;
    let (a, b) = spec.bounds[0];
    let bound_phase = spec.phase.bind(&spec.params)?;
    let slope = scan_max_slope(&bound_phase, 0, &[a], a, b)?;
    let mut h = (b - a) / 8.0;
    if slope > 0.0 {
        h = h.min(std::f64::consts::FRAC_PI_2 / slope);
    }
    let initial = ((b - a) / h).ceil() as usize;
    if initial > MAX_PANELS {
        return Err(Error::QuadratureFailure(format!(
            "{initial} quarter-period panels exceed the budget of {MAX_PANELS}"
        )));
    }
    let f = |x: f64| -> Result<(C64, f64)> {
        let w = weight.eval(&[x])?;
        if w == C64::new(0.0, 0.0) {
            return Ok((w, 0.0));
        }
        let phi = phase.eval_real(&[x])?;
        // a large phase is only known to a few ulps of its size
        Ok((w * C64::from_polar(1.0, phi), w.norm() * PHASE_ULPS * f64::EPSILON * phi.abs()))
    };
    let engine = Adaptive {
        tol,
        l1_floor: L1_FLOOR_1D,
        parallel: true,
    };
    let (sum, used) = engine.run(|lo, hi| gk::gk15(&f, lo, hi), a, b, initial)?;
    Ok(OracleResult {
        value: sum.value,
        error_estimate: sum.err + sum.noise,
        panels_used: used,
    })
}

/// Iterated oracle for `d ∈ {1, 2, 3}`; the per-level tolerance is `tol/(3d)`.
pub fn quad_nd(spec: &IntegralSpec, tol: f64) -> Result<OracleResult> {
    let d = spec.dim();
    if d == 1 {
        return quad1d(spec, tol);
    }
    if !(2..=3).contains(&d) {
        return Err(Error::InvalidInput(format!(
            "quad_nd supports 1 to 3 dimensions, got {d}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidInput("tolerance must be positive".into()));
    }
    spec.check()?;
    let (phase, weight) = spec.compiled()?;
    let level_tol = tol / (3.0 * d as f64);
    let it = Iterated {
        phase: &phase,
        weight: &weight,
        bounds: &spec.bounds,
        tol: level_tol,
    };
    let mut point: Vec<f64> = spec.bounds.iter().map(|&(a, _)| a).collect();
    let (sum, used) = it.level(d - 1, &mut point, true)?;
    Ok(OracleResult {
        value: sum.value,
        error_estimate: sum.err + sum.noise,
        panels_used: used,
    })
}

struct Iterated<'a> {
    phase: &'a Program,
    weight: &'a Program,
    bounds: &'a [(f64, f64)],
    tol: f64,
}

impl Iterated<'_> {
    fn level(&self, k: usize, point: &mut [f64], parallel: bool) -> Result<(PanelEval, usize)> {
        let (a, b) = self.bounds[k];
        // error targets are relative to ∫|f| at every level
        let engine = Adaptive {
            tol: self.tol,
            l1_floor: self.tol,
            parallel,
        };
        if k == 0 {
            let base = point.to_vec();
            let f = |x: f64| -> Result<(f64, C64)> {
                let mut p = base.clone();
                p[0] = x;
                Ok((self.phase.eval_real(&p)?, self.weight.eval(&p)?))
            };
            return engine.run(|lo, hi| filon::filon_panel(&f, lo, hi), a, b, 2);
        }
        let base = point.to_vec();
        let inner_used = std::sync::atomic::AtomicUsize::new(0);
        let f = |x: f64| -> Result<(C64, f64)> {
            let mut p = base.clone();
            p[k] = x;
            let (r, used) = self.level(k - 1, &mut p, false)?;
            inner_used.fetch_add(used, std::sync::atomic::Ordering::Relaxed);
            Ok((r.value, r.err + r.noise))
        };
        let (sum, used) = engine.run(|lo, hi| gk::gk15(&f, lo, hi), a, b, 8)?;
        Ok((sum, used + inner_used.into_inner()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse::parse_expr;

    fn spec1(phase: &str, weight: &str, a: f64, b: f64, params: Params) -> IntegralSpec {
        IntegralSpec::new(
            parse_expr(phase).unwrap(),
            parse_expr(weight).unwrap(),
            vec![(a, b)],
            params,
        )
    }

    /// ∫_{-1}^{1} exp(-1/(1-u²)) du by tanh-sinh quadrature, independent of
    /// the Gauss–Kronrod machinery.
    fn bump_mass() -> f64 {
        let h = 1.0 / 64.0;
        let mut s = 0.0;
        for i in -400i32..=400 {
            let t = i as f64 * h;
            let arg = std::f64::consts::FRAC_PI_2 * t.sinh();
            let u = arg.tanh();
            let du = std::f64::consts::FRAC_PI_2 * t.cosh() / arg.cosh().powi(2);
            let one_minus = 1.0 / (arg.cosh().powi(2)); // 1 - u² without cancellation
            if one_minus > 0.0 {
                s += (-1.0 / one_minus).exp() * du;
            }
            let _ = u;
        }
        s * h
    }

    #[test]
    fn unit_bump_mass() {
        let m = bump_mass();
        assert!((m - 0.443993816168).abs() < 1e-11, "{m}");
        let r = quad1d(&spec1("0", "bump(2*x1-3)", 1.0, 2.0, Params::new()), 1e-12).unwrap();
        assert!((r.value.re - 0.5 * m).abs() < 1e-13, "{}", r.value);
        assert_eq!(r.value.im, 0.0);
    }

    #[test]
    fn conjugate_phase_gives_conjugate() {
        let p = Params::new().with("A", 300.0);
        let r1 = quad1d(&spec1("A*(x1-1.4)^2", "bump(2*x1-3)", 1.0, 2.0, p.clone()), 1e-11).unwrap();
        let r2 = quad1d(&spec1("-(A*(x1-1.4)^2)", "bump(2*x1-3)", 1.0, 2.0, p), 1e-11).unwrap();
        assert!((r1.value - r2.value.conj()).norm() <= r1.error_estimate.max(1e-15));
    }

    #[test]
    fn tolerance_refinement_is_consistent() {
        let p = Params::new().with("A", 1000.0);
        let s = spec1("A*(x1-1.3)^2 + x1^3", "bump(2*x1-3)*(1+x1)", 1.0, 2.0, p);
        let coarse = quad1d(&s, 1e-6).unwrap();
        let fine = quad1d(&s, 1e-7).unwrap();
        assert!((coarse.value - fine.value).norm() <= 10.0 * coarse.error_estimate);
    }

    #[test]
    fn separable_product_in_3d() {
        let w = "bump(2*x1-3)*bump(x2-1.5)*bump((x3-1)/0.5)";
        let s = IntegralSpec::new(
            parse_expr("0").unwrap(),
            parse_expr(w).unwrap(),
            vec![(1.0, 2.0), (0.5, 2.5), (0.5, 1.5)],
            Params::new(),
        );
        let r = quad_nd(&s, 1e-10).unwrap();
        let m = bump_mass();
        let expect = (0.5 * m) * m * (0.5 * m);
        assert!((r.value.re - expect).abs() < 1e-8 * expect, "{} vs {expect}", r.value);
    }

    #[test]
    fn factorizes_in_2d() {
        let p = Params::new().with("L", 200.0);
        let s2 = IntegralSpec::new(
            parse_expr("L*(x1-1.4)^2").unwrap(),
            parse_expr("bump(2*x1-3)*bump(2*x2-3)").unwrap(),
            vec![(1.0, 2.0), (1.0, 2.0)],
            p.clone(),
        );
        let r2 = quad_nd(&s2, 1e-10).unwrap();
        let r1 = quad1d(&spec1("L*(x1-1.4)^2", "bump(2*x1-3)", 1.0, 2.0, p), 1e-12).unwrap();
        let expect = r1.value * (0.5 * bump_mass());
        assert!((r2.value - expect).norm() < 1e-8 * expect.norm(), "{} vs {expect}", r2.value);
    }

    #[test]
    fn budget_overflow_is_reported() {
        let p = Params::new().with("L", 1e12);
        let r = quad1d(&spec1("L*x1", "bump(2*x1-3)", 1.0, 2.0, p), 1e-8);
        assert!(matches!(r, Err(Error::QuadratureFailure(_))));
    }
}
