//! Iterated stationary phase: variables are eliminated one at a time, each
//! step turning the integrand into a new phase `φ(t₀(s), s)` and a numeric
//! weight family in the remaining variables.

use std::f64::consts::PI;
use std::sync::Arc;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::eval::{BoundExpr, SeriesFn};
use crate::expansion::{sp_expand, ExpansionResult, PhaseFamily, T0Source, WeightFamily, WeightOut};
use crate::expr::{Expr, Params};
use crate::oracle::IntegralSpec;
use crate::series::{bump_value, C64};
use crate::stationary::{classify, t0_monomial, SPContext, StationaryPointForm, StationaryResult};

/// Spectator grid points per axis for classification and monomial fitting.
pub const SPECTATOR_GRID: usize = 5;

/// Grid points per axis for the automatic choice of `Y`.
pub const AUTO_GRID: usize = 7;

/// Largest denominator tried when snapping fitted exponents.
const MAX_DENOMINATOR: i64 = 12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepScales {
    /// `Z` is the interval length, `Y = max |Z² φ''|` over a grid of the
    /// support and `X = 1`.
    Auto,
    Fixed { z: f64, y: f64, x: f64 },
}

/// The parameters of the three-variable model problem
/// `∫ w(x) e(-t x₁x₂x₃ + λ·x) dx`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ambient {
    pub q: f64,
    pub delta: f64,
    pub t: f64,
    pub lambda: Vec<f64>,
    pub x: Vec<f64>,
}

impl Ambient {
    pub const DEFAULT_Q: f64 = 1e3;
    pub const DEFAULT_DELTA: f64 = 0.1;

    /// `P = t X₁ ··· X_d`.
    pub fn p(&self) -> f64 {
        self.t * self.x.iter().product::<f64>()
    }
}

#[derive(Debug, Clone)]
pub struct PipelineSpec {
    /// Phase in radians.
    pub integral: IntegralSpec,
    /// Variables in the order they are eliminated.
    pub order: Vec<usize>,
    pub scales: Vec<StepScales>,
    pub ambient: Option<Ambient>,
}

impl PipelineSpec {
    pub fn new(integral: IntegralSpec, order: Vec<usize>) -> Self {
        let scales = vec![StepScales::Auto; order.len()];
        PipelineSpec {
            integral,
            order,
            scales,
            ambient: None,
        }
    }

    fn validate(&self) -> Result<()> {
        let d = self.integral.dim();
        if !(1..=3).contains(&d) {
            return Err(Error::InvalidInput(format!("pipelines take 1 to 3 variables, got {d}")));
        }
        let mut seen = self.order.clone();
        seen.sort_unstable();
        if seen != (0..d).collect::<Vec<_>>() {
            return Err(Error::InvalidInput(format!(
                "elimination order {:?} is not a permutation of the {d} variables",
                self.order
            )));
        }
        if self.scales.len() != d {
            return Err(Error::InvalidInput(format!("need {d} step scales, got {}", self.scales.len())));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Prune {
    Pruned(String),
    Proceed,
}

/// Drops integrals that are negligible by the dyadic-window argument:
/// some `λ_i` outside `[P/(8X_i), 8P/X_i]`, or `P < q^δ`.
pub fn prune(spec: &PipelineSpec) -> Prune {
    let Some(amb) = &spec.ambient else {
        return Prune::Proceed;
    };
    let p = amb.p();
    if p < amb.q.powf(amb.delta) {
        return Prune::Pruned(format!("P = {p} is below q^delta = {}", amb.q.powf(amb.delta)));
    }
    for (i, (&l, &x)) in amb.lambda.iter().zip(&amb.x).enumerate() {
        let (lo, hi) = (p / (8.0 * x), 8.0 * p / x);
        let l = l.abs();
        if l < lo || l > hi {
            return Prune::Pruned(format!(
                "|lambda{}| = {l} is outside [{lo}, {hi}]",
                i + 1
            ));
        }
    }
    Prune::Proceed
}

/// One elimination step.
#[derive(Debug, Clone)]
pub struct StepRecord {
    /// The eliminated variable (original index).
    pub var: usize,
    pub z: f64,
    pub y: f64,
    pub x: f64,
    pub r: f64,
    /// Closed-form stationary point when one was detected.
    pub form: Option<StationaryPointForm>,
    /// Whether the new phase is still an expression.
    pub closed_phase: bool,
    /// Share of the spectator grid with a stationary point.
    pub stationary_share: f64,
    /// Spectator values on the stationary path, in the step's variable order.
    pub spectators: Vec<f64>,
    /// The expansion at those spectator values.
    pub expansion: ExpansionResult,
}

#[derive(Debug, Clone)]
pub struct PipelineResult {
    pub value: C64,
    pub steps: Vec<StepRecord>,
    /// `Π Z/√Y` over the steps.
    pub scale: f64,
    pub final_phase: f64,
    pub final_weight: C64,
    /// The stationary point in the original variables.
    pub stationary_point: Vec<f64>,
    pub predicted: Option<C64>,
    pub pruned: Option<String>,
}

impl PipelineResult {
    fn pruned(reason: String) -> Self {
        PipelineResult {
            value: C64::new(0.0, 0.0),
            steps: Vec::new(),
            scale: 0.0,
            final_phase: 0.0,
            final_weight: C64::new(0.0, 0.0),
            stationary_point: Vec::new(),
            predicted: None,
            pruned: Some(reason),
        }
    }

    /// Sum of the per-step truncation estimates relative to each step's
    /// main term, scaled to the size of the final value.
    pub fn error_estimate(&self) -> f64 {
        let rel: f64 = self
            .steps
            .iter()
            .map(|s| s.expansion.truncation_estimate / s.expansion.main_value.norm())
            .sum();
        rel * self.value.norm()
    }
}

/// Midpoint grid with `n` points per axis; one empty point in dimension 0.
fn grid(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![Vec::new()];
    for &(a, b) in bounds {
        out = out
            .iter()
            .flat_map(|p| {
                (0..n).map(move |k| {
                    let mut q = p.clone();
                    q.push(a + (b - a) * (k as f64 + 0.5) / n as f64);
                    q
                })
            })
            .collect();
    }
    out
}

fn auto_y(phase: &dyn SeriesFn, var: usize, bounds: &[(f64, f64)], z: f64) -> Result<f64> {
    let mut y = 0.0f64;
    for p in grid(bounds, AUTO_GRID) {
        match phase.jet(var, &p, 2) {
            Ok(j) => y = y.max((2.0 * z * z * j.coeff(2).re).abs()),
            Err(Error::NotStationary(_)) => continue,
            Err(e) => return Err(e),
        }
    }
    Ok(y)
}

fn curvature_definite(ctx: &SPContext, s: &[f64]) -> Result<bool> {
    let (a, b) = ctx.interval;
    let mut signs = Vec::with_capacity(crate::stationary::GRID_POINTS);
    for i in 0..crate::stationary::GRID_POINTS {
        let t = a + (b - a) * i as f64 / (crate::stationary::GRID_POINTS - 1) as f64;
        let j = ctx.phase.jet(ctx.var, &ctx.point(t, s), 2)?;
        signs.push(j.coeff(2).re.signum() * (j.coeff(2).re != 0.0) as i32 as f64);
    }
    Ok(signs.iter().all(|&x| x == 1.0) || signs.iter().all(|&x| x == -1.0))
}

/// Nearest fraction with denominator at most [`MAX_DENOMINATOR`].
fn snap(e: f64) -> Option<f64> {
    (1..=MAX_DENOMINATOR)
        .map(|q| (e * q as f64).round() / q as f64)
        .find(|r| (r - e).abs() < 1e-6)
}

/// Solves the normal equations of a small least-squares problem.
fn least_squares(rows: &[Vec<f64>], rhs: &[f64]) -> Option<Vec<f64>> {
    let n = rows.first()?.len();
    let mut a = vec![vec![0.0; n + 1]; n];
    for (row, &b) in rows.iter().zip(rhs) {
        for i in 0..n {
            for j in 0..n {
                a[i][j] += row[i] * row[j];
            }
            a[i][n] += row[i] * b;
        }
    }
    for c in 0..n {
        let piv = (c..n).max_by(|&i, &j| a[i][c].abs().total_cmp(&a[j][c].abs()))?;
        a.swap(c, piv);
        if a[c][c].abs() < 1e-300 {
            return None;
        }
        for r in 0..n {
            if r != c {
                let f = a[r][c] / a[c][c];
                for k in c..=n {
                    a[r][k] -= f * a[c][k];
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Recognises `t₀(s) = c Π s_i^{α_i}` with small rational exponents from
/// sampled stationary points, verified to 1e-10 relative.
fn detect_monomial(samples: &[(Vec<f64>, f64)]) -> Option<StationaryPointForm> {
    let first = samples.first()?;
    let k = first.0.len();
    if samples.iter().any(|(s, t)| *t <= 0.0 || s.iter().any(|&x| x <= 0.0)) {
        return None;
    }
    let exponents = if k == 0 {
        Vec::new()
    } else {
        if samples.len() < k + 2 {
            return None;
        }
        let rows: Vec<Vec<f64>> = samples
            .iter()
            .map(|(s, _)| std::iter::once(1.0).chain(s.iter().map(|x| x.ln())).collect())
            .collect();
        let rhs: Vec<f64> = samples.iter().map(|(_, t)| t.ln()).collect();
        let fit = least_squares(&rows, &rhs)?;
        fit[1..].iter().map(|&e| snap(e)).collect::<Option<Vec<f64>>>()?
    };
    let monomial = |s: &[f64]| s.iter().zip(&exponents).map(|(x, e)| x.powf(*e)).product::<f64>();
    let log_c = samples.iter().map(|(s, t)| (t / monomial(s)).ln()).sum::<f64>() / samples.len() as f64;
    let form = t0_monomial(log_c.exp(), &exponents).ok()?;
    let fits = samples.iter().all(|(s, t)| match form.value(s) {
        Ok(v) => (v - t).abs() <= 1e-10 * t,
        Err(_) => false,
    });
    fits.then_some(form)
}

struct Stage {
    /// Original index of each current variable.
    vars: Vec<usize>,
    bounds: Vec<(f64, f64)>,
    phase: Arc<dyn SeriesFn>,
    phase_expr: Option<Expr>,
    weight: Arc<dyn SeriesFn>,
}

struct Step {
    ctx: SPContext,
    weight: Arc<dyn SeriesFn>,
    record: StepRecord,
}

fn violation(step: usize, var: usize, reason: impl Into<String>) -> Error {
    Error::StepHypothesisViolation {
        step,
        var: var + 1,
        reason: reason.into(),
    }
}

/// Runs the elimination with `n_max` correction terms per step.
pub fn run(spec: &PipelineSpec, n_max: usize) -> Result<PipelineResult> {
    spec.validate()?;
    if let Prune::Pruned(reason) = prune(spec) {
        return Ok(PipelineResult::pruned(reason));
    }
    let d = spec.integral.dim();
    let phase_expr = spec.integral.phase.bind(&spec.integral.params)?;
    let mut stage = Stage {
        vars: (0..d).collect(),
        bounds: spec.integral.bounds.clone(),
        phase: Arc::new(BoundExpr::new(&phase_expr, &Params::new(), d)?),
        phase_expr: Some(phase_expr),
        weight: Arc::new(BoundExpr::new(&spec.integral.weight, &spec.integral.params, d)?),
    };
    let mut steps: Vec<Step> = Vec::with_capacity(d);
    let mut scale = 1.0;
    for (k, (&var, scales)) in spec.order.iter().zip(&spec.scales).enumerate() {
        let pos = stage.vars.iter().position(|&v| v == var).expect("validated order");
        let (a, b) = stage.bounds[pos];
        let (z, y, x) = match *scales {
            StepScales::Fixed { z, y, x } => (z, y, x),
            StepScales::Auto => {
                let z = b - a;
                (z, auto_y(stage.phase.as_ref(), pos, &stage.bounds, z)?, 1.0)
            }
        };
        let r = y / (x * x);
        if !(r >= 1.0) {
            return Err(violation(k, var, format!("Y/X^2 = {r} is below 1")));
        }
        let mut spectator_bounds = stage.bounds.clone();
        spectator_bounds.remove(pos);
        let ctx = SPContext::new(stage.phase.clone(), pos, z, y, x, r)?
            .with_interval(a, b)?
            .with_spectator_scales(spectator_bounds.iter().map(|&(_, hi)| hi).collect());
        let points = grid(&spectator_bounds, SPECTATOR_GRID);
        let classes: Vec<StationaryResult> = points
            .par_iter()
            .map(|s| classify(&ctx, s))
            .collect::<Result<_>>()
            .map_err(|e| violation(k, var, e.to_string()))?;
        let mut samples = Vec::new();
        for (s, c) in points.iter().zip(&classes) {
            match c {
                StationaryResult::Stationary { t0, .. } => samples.push((s.clone(), *t0)),
                StationaryResult::NonStationary { .. } => {}
                // a stationary point at the very edge of the interval is
                // harmless; only a curvature change breaks the hypotheses
                StationaryResult::Indeterminate(reason) if !curvature_definite(&ctx, s)? => {
                    return Err(violation(k, var, format!("at spectators {s:?}: {reason}")))
                }
                StationaryResult::Indeterminate(_) => {}
            }
        }
        if samples.is_empty() {
            return Err(violation(k, var, "no stationary point on the spectator grid"));
        }
        let stationary_share = samples.len() as f64 / points.len() as f64;
        let form = detect_monomial(&samples);
        let source = match &form {
            Some(f) => T0Source::Monomial(f.clone()),
            None => T0Source::Implicit,
        };
        let out = Arc::new(WeightOut::new(ctx.clone(), stage.weight.clone(), n_max, source)?);
        let new_expr = match (&form, &stage.phase_expr) {
            (Some(f), Some(e)) => {
                let subs: Vec<Expr> = (0..stage.vars.len())
                    .map(|i| match i.cmp(&pos) {
                        std::cmp::Ordering::Less => Expr::var(i),
                        std::cmp::Ordering::Equal => f.expr(|j| j),
                        std::cmp::Ordering::Greater => Expr::var(i - 1),
                    })
                    .collect();
                Some(e.substitute_vars(&subs))
            }
            _ => None,
        };
        let new_phase: Arc<dyn SeriesFn> = match &new_expr {
            Some(e) => Arc::new(BoundExpr::new(e, &Params::new(), stage.vars.len() - 1)?),
            None => Arc::new(PhaseFamily(out.clone())),
        };
        steps.push(Step {
            ctx,
            weight: stage.weight.clone(),
            record: StepRecord {
                var,
                z,
                y,
                x,
                r,
                form,
                closed_phase: new_expr.is_some(),
                stationary_share,
                spectators: Vec::new(),
                expansion: placeholder_expansion(),
            },
        });
        scale *= out.normalization().recip();
        stage.vars.remove(pos);
        stage.bounds = spectator_bounds;
        stage.phase = new_phase;
        stage.phase_expr = new_expr;
        stage.weight = Arc::new(WeightFamily(out));
    }
    let final_phase = stage.phase.value(&[])?.re;
    let final_weight = stage.weight.value(&[])?;
    let value = C64::from_polar(scale, final_phase) * final_weight;

    // walk back along the stationary path
    let mut point: Vec<f64> = Vec::new();
    let mut vars: Vec<usize> = Vec::new();
    for (k, step) in steps.iter_mut().enumerate().rev() {
        let e = sp_expand(&step.ctx, step.weight.as_ref(), &point, n_max)
            .map_err(|e| violation(k, step.record.var, e.to_string()))?;
        step.record.spectators = point.clone();
        point = step.ctx.point(e.t0, &point);
        vars.insert(step.ctx.var, step.record.var);
        step.record.expansion = e;
    }
    let mut stationary_point = vec![0.0; d];
    for (v, x) in vars.iter().zip(&point) {
        stationary_point[*v] = *x;
    }
    Ok(PipelineResult {
        value,
        steps: steps.into_iter().map(|s| s.record).collect(),
        scale,
        final_phase,
        final_weight,
        stationary_point,
        predicted: None,
        pruned: None,
    })
}

fn placeholder_expansion() -> ExpansionResult {
    ExpansionResult {
        t0: f64::NAN,
        phase_at_t0: f64::NAN,
        phase_dd_at_t0: f64::NAN,
        terms: Vec::new(),
        main_value: C64::new(f64::NAN, f64::NAN),
        w_value: C64::new(f64::NAN, f64::NAN),
        truncation_estimate: f64::NAN,
        conjugate: false,
    }
}

/// The model problem with `X_i = 1`, `t = P`, `λ_i = ratio_i·P` and weight
/// `Π b(3x_i - 3)` on `[2/3, 4/3]³`.
#[derive(Debug, Clone)]
pub struct CiExample {
    /// The integral in the original variables.
    pub integral: IntegralSpec,
    /// The integral after `x₁ → x₁ X₂X₃/(x₂x₃)`, ready for elimination in
    /// the order `x₃, x₂, x₁`.
    pub pipeline: PipelineSpec,
    pub ambient: Ambient,
}

impl CiExample {
    pub fn new(p: f64, ratios: [f64; 3], q: f64) -> Result<Self> {
        if !(p >= 50.0) {
            return Err(Error::InvalidInput(format!("P = {p} is below 50")));
        }
        if ratios.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
            return Err(Error::InvalidInput(format!("ratios must be positive, got {ratios:?}")));
        }
        let ambient = Ambient {
            q,
            delta: Ambient::DEFAULT_DELTA,
            t: p,
            lambda: ratios.iter().map(|r| r * p).collect(),
            x: vec![1.0; 3],
        };
        let params = Params::new()
            .with("t", ambient.t)
            .with("lambda1", ambient.lambda[0])
            .with("lambda2", ambient.lambda[1])
            .with("lambda3", ambient.lambda[2]);
        let (x1, x2, x3) = (Expr::var(0), Expr::var(1), Expr::var(2));
        let lam = |i: usize| Expr::param(&format!("lambda{i}"));
        let two_pi = Expr::Const(2.0 * PI);
        let bump = |x: Expr| (Expr::Const(3.0) * x - Expr::Const(3.0)).bump();
        let box3 = vec![(2.0 / 3.0, 4.0 / 3.0); 3];
        let integral = IntegralSpec::new(
            two_pi.clone()
                * (lam(1) * x1.clone() + lam(2) * x2.clone() + lam(3) * x3.clone()
                    - Expr::param("t") * x1.clone() * x2.clone() * x3.clone()),
            bump(x1.clone()) * bump(x2.clone()) * bump(x3.clone()),
            box3.clone(),
            params.clone(),
        );
        // x1 = u·X2X3/(x2x3) with Jacobian X2X3/(x2x3)
        let u = x1 / (x2.clone() * x3.clone());
        let substituted = IntegralSpec::new(
            two_pi
                * (lam(1) * u.clone() + lam(2) * x2.clone() + lam(3) * x3.clone()
                    - Expr::param("t") * Expr::var(0)),
            bump(u.clone()) * bump(x2.clone()) * bump(x3.clone()) * (u / Expr::var(0)),
            vec![(8.0 / 27.0, 64.0 / 27.0), box3[1], box3[2]],
            params,
        );
        let mut pipeline = PipelineSpec::new(substituted, vec![2, 1, 0]);
        pipeline.ambient = Some(ambient.clone());
        Ok(CiExample {
            integral,
            pipeline,
            ambient,
        })
    }

    /// `S = √(λ₁λ₂λ₃/t)`; the phase at the stationary point is `2S` in
    /// `e(·)` normalisation.
    pub fn s(&self) -> f64 {
        let l = &self.ambient.lambda;
        (l[0] * l[1] * l[2] / self.ambient.t).sqrt()
    }

    /// The three stationary points in closed form, in the substituted
    /// variables: `x₃ = (λ₁x₁/(λ₃x₂))^{1/2}`, `x₂ = (λ₁λ₃x₁/λ₂²)^{1/3}`,
    /// `x₁ = (λ₁λ₂λ₃/t³)^{1/2}`, each in its step's spectators.
    pub fn closed_forms(&self) -> [StationaryPointForm; 3] {
        let l = &self.ambient.lambda;
        let t = self.ambient.t;
        [
            StationaryPointForm {
                c: (l[0] / l[2]).sqrt(),
                exponents: vec![0.5, -0.5],
            },
            StationaryPointForm {
                c: (l[0] * l[2] / (l[1] * l[1])).powf(1.0 / 3.0),
                exponents: vec![1.0 / 3.0],
            },
            StationaryPointForm {
                c: (l[0] * l[1] * l[2] / t.powi(3)).sqrt(),
                exponents: vec![],
            },
        ]
    }

    /// Leading-order stationary phase in all three variables at once:
    /// `w(x₀) e^{iΦ(x₀)} (2π)^{3/2} e^{iπ/4} / √|det Φ''(x₀)|`.
    pub fn predicted(&self) -> C64 {
        let s = self.s();
        let t = self.ambient.t;
        let x0: Vec<f64> = self.ambient.lambda.iter().map(|l| s / l).collect();
        let w: f64 = x0.iter().map(|&x| bump_value(3.0 * x - 3.0)).product();
        let det = (2.0 * PI * t).powi(3) * 2.0 * x0.iter().product::<f64>();
        let amp = w * (2.0 * PI).powf(1.5) / det.sqrt();
        C64::from_polar(amp, 2.0 * PI * 2.0 * s + PI / 4.0)
    }
}

/// The model problem at `P` run with `n_max = 1`.
pub fn ci_example(p: f64, ratios: [f64; 3], q: f64) -> Result<PipelineResult> {
    ci_example_with(p, ratios, q, 1)
}

pub fn ci_example_with(p: f64, ratios: [f64; 3], q: f64, n_max: usize) -> Result<PipelineResult> {
    let ex = CiExample::new(p, ratios, q)?;
    let mut r = run(&ex.pipeline, n_max)?;
    if r.pruned.is_none() {
        r.predicted = Some(ex.predicted());
    }
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::quad_nd;
    use crate::parse::parse_expr;
    use crate::stationary::SPContext;

    fn rel(a: C64, b: C64) -> f64 {
        (a - b).norm() / b.norm()
    }

    #[test]
    fn pruning_window() {
        let ex = CiExample::new(100.0, [1.0, 1.0, 1.0], 1e3).unwrap();
        assert_eq!(prune(&ex.pipeline), Prune::Proceed);
        let mut spec = ex.pipeline.clone();
        spec.ambient.as_mut().unwrap().lambda[0] = 1e-3 * 100.0;
        assert!(matches!(prune(&spec), Prune::Pruned(_)));
        let amb = spec.ambient.as_mut().unwrap();
        *amb = Ambient {
            q: 1e6,
            delta: 0.1,
            t: 1.0,
            lambda: vec![1.0; 3],
            x: vec![1.0; 3],
        };
        assert!(matches!(prune(&spec), Prune::Pruned(_)));
        let r = ci_example(100.0, [16.0, 1.0, 1.0], 1e3).unwrap();
        assert!(r.pruned.is_some() && r.steps.is_empty());
    }

    #[test]
    fn snapping() {
        assert_eq!(snap(0.5 + 1e-9), Some(0.5));
        assert_eq!(snap(-1.0 / 3.0 + 1e-8), Some(-1.0 / 3.0));
        assert_eq!(snap(0.123456), None);
    }

    #[test]
    fn one_variable_matches_a_single_expansion() {
        let phase = parse_expr("300*(x1-1.4)^2 + 20*(x1-1.4)^3").unwrap();
        let weight = parse_expr("bump(2*x1-3)*(1 + x1)").unwrap();
        let spec = PipelineSpec::new(IntegralSpec::new(phase.clone(), weight.clone(), vec![(1.0, 2.0)], Params::new()), vec![0]);
        let r = run(&spec, 2).unwrap();
        let s = &r.steps[0];
        let ctx = SPContext::from_expr(&phase, &Params::new(), 1, 0, s.z, s.y, s.x)
            .unwrap()
            .with_interval(1.0, 2.0)
            .unwrap();
        let w = BoundExpr::new(&weight, &Params::new(), 1).unwrap();
        let e = sp_expand(&ctx, &w, &[], 2).unwrap();
        assert!(rel(r.value, e.main_value) < 1e-12, "{} vs {}", r.value, e.main_value);
    }

    #[test]
    fn model_problem_follows_the_closed_forms() {
        let ex = CiExample::new(100.0, [1.0, 1.0, 1.0], 1e3).unwrap();
        let r = run(&ex.pipeline, 1).unwrap();
        let forms = ex.closed_forms();
        for (step, form) in r.steps.iter().zip(&forms) {
            let found = step.form.as_ref().expect("monomial step");
            assert_eq!(found.exponents, form.exponents);
            assert!((found.c - form.c).abs() < 1e-10 * form.c);
            let t0 = step.expansion.t0;
            assert!((t0 - form.value(&step.spectators).unwrap()).abs() < 1e-8 * t0);
            assert!(step.closed_phase);
        }
        let expected = 2.0 * PI * 2.0 * ex.s();
        assert!((r.final_phase - expected).abs() < 1e-6 * expected);
        for x in &r.stationary_point {
            assert!((x - 1.0).abs() < 1e-10);
        }
        // |I| ≍ X₁X₂X₃/P^{3/2}
        let size = r.value.norm() * 100f64.powf(1.5);
        assert!(size > 0.01 && size < 1.0, "{size}");
    }

    #[test]
    fn leading_order_is_the_joint_stationary_phase() {
        for ratios in [[1.0, 1.0, 1.0], [1.2, 0.9, 1.1]] {
            let ex = CiExample::new(200.0, ratios, 1e3).unwrap();
            let r = run(&ex.pipeline, 0).unwrap();
            assert!(rel(r.value, ex.predicted()) < 1e-8, "{} vs {}", r.value, ex.predicted());
        }
    }

    #[test]
    fn new_phase_is_the_old_phase_on_the_path() {
        let ex = CiExample::new(150.0, [1.1, 1.0, 0.95], 1e3).unwrap();
        let phase = ex.pipeline.integral.phase.bind(&ex.pipeline.integral.params).unwrap();
        let forms = ex.closed_forms();
        let f3 = BoundExpr::new(&phase, &Params::new(), 3).unwrap();
        for s in [[0.9, 1.0], [1.1, 0.8], [1.3, 1.2]] {
            let t0 = forms[0].value(&s).unwrap();
            let old = f3.value(&[s[0], s[1], t0]).unwrap().re;
            let new = phase
                .substitute_vars(&[Expr::var(0), Expr::var(1), forms[0].expr(|j| j)])
                .bind(&Params::new())
                .unwrap();
            let new = crate::eval::eval(&new, &s, &Params::new()).unwrap().re;
            assert!((old - new).abs() <= 1e-10 * old.abs());
        }
    }

    #[test]
    fn elimination_order_barely_matters() {
        let ex = CiExample::new(200.0, [1.0, 1.1, 0.9], 1e3).unwrap();
        let a = run(&ex.pipeline, 1).unwrap();
        let mut spec = ex.pipeline.clone();
        spec.order = vec![1, 2, 0];
        let b = run(&spec, 1).unwrap();
        let bound = a.error_estimate() + b.error_estimate();
        assert!((a.value - b.value).norm() <= bound, "{} {} {bound}", a.value, b.value);
    }

    #[test]
    fn numeric_phase_path_matches_the_oracle() {
        // t₀(x₂) = 1.5 + 0.1 sin(x₂) is not a monomial
        let phase = parse_expr("400*((x1 - 1.5 - 0.1*sin(x2))^2 + (x2-1.5)^2) + 30*(x1-1.5)^3").unwrap();
        let weight = parse_expr("bump(2*x1-3)*bump(2*x2-3)").unwrap();
        let integral = IntegralSpec::new(phase, weight, vec![(1.0, 2.0), (1.0, 2.0)], Params::new());
        let r = run(&PipelineSpec::new(integral.clone(), vec![0, 1]), 2).unwrap();
        assert!(r.steps[0].form.is_none() && !r.steps[0].closed_phase);
        let o = quad_nd(&integral, 1e-9).unwrap();
        assert!(rel(r.value, o.value) < 1e-4, "{} vs {}", r.value, o.value);
    }

    #[test]
    fn indefinite_step_is_a_violation() {
        let phase = parse_expr("100*(x1-1.5)^3 - 10*x1").unwrap();
        let spec = PipelineSpec::new(
            IntegralSpec::new(phase, parse_expr("bump(2*x1-3)").unwrap(), vec![(1.0, 2.0)], Params::new()),
            vec![0],
        );
        assert!(matches!(run(&spec, 1), Err(Error::StepHypothesisViolation { .. })));
    }
}
