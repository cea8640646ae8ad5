//! Executes a [`RunConfig`] and builds its [`Report`].

use std::f64::consts::PI;
use std::sync::Arc;

use crate::config::{Mode, RunConfig};
use crate::error::{Error, Result};
use crate::eval::{BoundExpr, SeriesFn};
use crate::expr::Params;
use crate::inert::{check_inert_seeded, fourier_decay_check, FourierCheck};
use crate::oracle::{quad1d, quad_nd, IntegralSpec, OracleResult};
use crate::pipeline::{self, CiExample};
use crate::report::{num, Report, Table};
use crate::series::C64;
use crate::stationary::{classify, SPContext, StationaryResult, GRID_POINTS};

/// Relative accuracy required of the stationary points in `example-ci`.
pub const POINT_TOL: f64 = 1e-8;

/// Relative accuracy required of the final phase in `example-ci`.
pub const PHASE_TOL: f64 = 1e-6;

/// Non-stationary integrals must satisfy `|I| ≤ Z·R^{-3}·NONSTATIONARY_FACTOR`.
pub const NONSTATIONARY_FACTOR: f64 = 1e3;

pub fn run_config(cfg: &RunConfig) -> Result<Report> {
    match cfg.mode {
        Mode::Oracle => run_oracle(cfg),
        Mode::Eval => run_eval(cfg),
        Mode::Compare => run_compare(cfg),
        Mode::InertCheck => run_inert_check(cfg),
        Mode::ExampleCi => run_example_ci(cfg),
    }
}

/// `quad1d` in one variable, `quad_nd` otherwise.
pub fn oracle(spec: &IntegralSpec, tol: f64) -> Result<OracleResult> {
    if spec.dim() == 1 {
        quad1d(spec, tol)
    } else {
        quad_nd(spec, tol)
    }
}

fn wrong_mode(cfg: &RunConfig, want: &str) -> Error {
    Error::InvalidInput(format!("mode {} has no {want} payload", cfg.mode.name()))
}

fn param_cell(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "-".into())
}

fn param_column(cfg: &RunConfig) -> String {
    cfg.integral()
        .and_then(|i| i.sweep.as_ref())
        .map(|s| s.param.clone())
        .unwrap_or_else(|| "case".into())
}

fn value_cells(v: C64) -> Vec<String> {
    vec![num(v.re), num(v.im), num(v.norm()), num(v.arg())]
}

pub fn run_oracle(cfg: &RunConfig) -> Result<Report> {
    let ic = cfg.integral().ok_or_else(|| wrong_mode(cfg, "integral"))?;
    let name = param_column(cfg);
    let mut t = Table::new("oracle", &[&name, "re", "im", "abs", "arg", "error_estimate", "panels"]);
    let mut sweep = Vec::new();
    for (v, params) in ic.points() {
        let o = oracle(&ic.integral(&params), cfg.tol)?;
        let mut row = vec![param_cell(v)];
        row.extend(value_cells(o.value));
        row.extend([num(o.error_estimate), o.panels_used.to_string()]);
        t.push(row, None);
        if let Some(v) = v {
            sweep.push((v, o.value.norm(), o.value.arg()));
        }
    }
    let mut r = Report::new("oracle");
    r.tables.push(t);
    r.sweep = ic.sweep.is_some().then_some(sweep);
    Ok(r)
}

pub fn run_eval(cfg: &RunConfig) -> Result<Report> {
    let ic = cfg.integral().ok_or_else(|| wrong_mode(cfg, "integral"))?;
    let name = param_column(cfg);
    let mut t = Table::new(
        "pipeline",
        &[&name, "re", "im", "abs", "arg", "error_estimate", "stationary_point"],
    );
    let mut sweep = Vec::new();
    for (v, params) in ic.points() {
        let r = pipeline::run(&ic.pipeline(&params), cfg.n_max)?;
        let mut row = vec![param_cell(v)];
        row.extend(value_cells(r.value));
        row.push(num(r.error_estimate()));
        row.push(r.stationary_point.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "));
        t.push(row, None);
        if let Some(v) = v {
            sweep.push((v, r.value.norm(), r.value.arg()));
        }
    }
    let mut r = Report::new("eval");
    r.tables.push(t);
    r.notes.push(format!("n_max = {}", cfg.n_max));
    r.sweep = ic.sweep.is_some().then_some(sweep);
    Ok(r)
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn fitted_slope(points: &[(f64, f64)]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    (sxx > 0.0).then(|| sxy / sxx)
}

/// Classifies a one-variable phase on its whole interval.
fn classify_1d(spec: &IntegralSpec) -> Result<(StationaryResult, f64)> {
    let phase = BoundExpr::new(&spec.phase, &spec.params, 1)?;
    let (a, b) = spec.bounds[0];
    let z = b - a;
    let mut slope = 0.0f64;
    for i in 0..GRID_POINTS {
        let t = a + z * i as f64 / (GRID_POINTS - 1) as f64;
        slope = slope.max(phase.jet(0, &[t], 1)?.coeff(1).re.abs());
    }
    let y = (z * slope).max(1.0);
    let ctx = SPContext::new(Arc::new(phase), 0, z, y, 1.0, 1.0)?.with_interval(a, b)?;
    Ok((classify(&ctx, &[])?, z))
}

/// Oracle against pipeline on every sweep point. Rows carry the verdict
/// `|diff| ≤ max(5·estimate, abs_floor)`; one-variable phases without a
/// stationary point are checked against `|I| ≤ Z·R^{-3}·10³` instead.
pub fn run_compare(cfg: &RunConfig) -> Result<Report> {
    let ic = cfg.integral().ok_or_else(|| wrong_mode(cfg, "integral"))?;
    let name = param_column(cfg);
    let mut t = Table::new(
        "compare",
        &[
            &name, "kind", "R", "oracle_re", "oracle_im", "main_re", "main_im", "abs_diff", "estimate",
            "verdict",
        ],
    );
    let mut rel_errors = Vec::new();
    let mut nonstationary = Vec::new();
    let mut sweep = Vec::new();
    for (v, params) in ic.points() {
        let spec = ic.integral(&params);
        let o = oracle(&spec, cfg.tol)?;
        let ns = match ic.dim() {
            1 => match classify_1d(&spec)? {
                (StationaryResult::NonStationary { min_abs_phase_deriv }, z) => Some((z, z * min_abs_phase_deriv)),
                _ => None,
            },
            _ => None,
        };
        let (kind, r_param, main, estimate, ok) = match ns {
            Some((z, r)) => {
                let bound = z * r.powi(-3) * NONSTATIONARY_FACTOR;
                nonstationary.push((r, o.value.norm()));
                ("NonStationary", r, C64::new(0.0, 0.0), bound, o.value.norm() <= bound)
            }
            None => {
                let p = pipeline::run(&ic.pipeline(&params), cfg.n_max)?;
                let est = p.error_estimate();
                let diff = (p.value - o.value).norm();
                let r = p.steps.first().map_or(f64::NAN, |s| s.r);
                if let Some(v) = v {
                    rel_errors.push((v, diff / o.value.norm()));
                }
                ("Stationary", r, p.value, est, diff <= (5.0 * est).max(cfg.abs_floor))
            }
        };
        let diff = (main - o.value).norm();
        t.push(
            vec![
                param_cell(v),
                kind.into(),
                num(r_param),
                num(o.value.re),
                num(o.value.im),
                num(main.re),
                num(main.im),
                num(diff),
                num(estimate),
            ],
            Some(ok),
        );
        if let Some(v) = v {
            sweep.push((v, o.value.norm(), o.value.arg()));
        }
    }
    let mut r = Report::new("compare");
    r.tables.push(t);
    r.notes.push(format!("n_max = {}, oracle tol = {}", cfg.n_max, num(cfg.tol)));
    if let Some(s) = fitted_slope(&rel_errors) {
        r.notes.push(format!("fitted slope of log relative error against log {name}: {s:.4}"));
    }
    if let Some(s) = fitted_slope(&nonstationary) {
        r.notes.push(format!("fitted decay exponent of log |I| against log R: {s:.4}"));
    }
    r.sweep = ic.sweep.is_some().then_some(sweep);
    Ok(r)
}

fn params_cell(p: &Params) -> String {
    p.iter().map(|(k, v)| format!("{k}={}", num(v))).collect::<Vec<_>>().join(" ")
}

pub fn run_inert_check(cfg: &RunConfig) -> Result<Report> {
    let fc = cfg.family().ok_or_else(|| wrong_mode(cfg, "family"))?;
    let family = fc.spec();
    let rep = check_inert_seeded(
        &family,
        fc.max_order,
        fc.n_param_samples,
        fc.n_point_samples,
        fc.ceiling,
        cfg.seed,
    )?;
    let mut t = Table::new("inert", &["j", "C_hat", "ceiling", "worst_T", "worst_x", "verdict"]);
    for row in &rep.rows {
        t.push(
            vec![
                row.j.to_string(),
                num(row.constant),
                num(row.ceiling),
                params_cell(&row.worst_params),
                row.worst_point.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "),
            ],
            Some(row.pass),
        );
    }
    let mut r = Report::new("inert-check");
    r.tables.push(t);
    r.notes.push(format!(
        "{} parameter samples from index {}, {} points per axis",
        rep.param_samples, cfg.seed, rep.point_samples
    ));
    if let Some(f) = &fc.fourier {
        let q = match f.q {
            Some(q) => q,
            None => {
                let m = family.member(&family.reference())?;
                m.bounds.iter().map(|b| b.0).fold(1.0, f64::max)
            }
        };
        let mut check = FourierCheck::new(f.var, f.grid.clone(), q, f.a);
        check.tol = cfg.tol;
        let fr = fourier_decay_check(&family, &check)?;
        let mut ft = Table::new(
            "fourier",
            &["t", "re", "im", "error_estimate", "envelope", "scaled_derivs", "beyond_threshold"],
        );
        for row in &fr.rows {
            ft.push(
                vec![
                    num(row.t),
                    num(row.value.re),
                    num(row.value.im),
                    num(row.error_estimate),
                    num(row.envelope),
                    row.scaled_derivs.iter().map(|x| num(*x)).collect::<Vec<_>>().join(" "),
                    row.beyond_threshold.to_string(),
                ],
                None,
            );
        }
        r.tables.push(ft);
        r.checks.push(("fourier_derivative_bounds".into(), fr.derivative_bounds_hold));
        r.checks.push(("fourier_decay".into(), fr.passes()));
        match fr.fitted_exponent {
            Some(e) => r.notes.push(format!(
                "fitted tail exponent {e:.4} from {} points, tested against A = {}",
                fr.tail_points, f.a
            )),
            None => r.notes.push("too few tail points above the quadrature noise for a fit".into()),
        }
        r.notes.push(format!("transform peak at t = {}, q = {}", num(fr.peak), num(q)));
    }
    Ok(r)
}

pub fn run_example_ci(cfg: &RunConfig) -> Result<Report> {
    let ec = cfg.example().ok_or_else(|| wrong_mode(cfg, "example"))?;
    let ex = CiExample::new(ec.p, ec.ratios, ec.q)?;
    let res = pipeline::run(&ex.pipeline, cfg.n_max)?;
    let mut r = Report::new("example-ci");
    if let Some(reason) = &res.pruned {
        r.notes.push(format!("pruned: {reason}"));
        return Ok(r);
    }
    let mut points = Table::new("stationary points", &["step", "var", "t0", "closed_form", "rel_diff", "verdict"]);
    for (k, (step, form)) in res.steps.iter().zip(ex.closed_forms()).enumerate() {
        let t0 = step.expansion.t0;
        let closed = form.value(&step.spectators)?;
        let rel = (t0 - closed).abs() / closed.abs();
        points.push(
            vec![k.to_string(), format!("x{}", step.var + 1), num(t0), num(closed), num(rel)],
            Some(rel <= POINT_TOL),
        );
    }
    r.tables.push(points);

    let expected = 2.0 * PI * 2.0 * ex.s();
    let mut phase = Table::new("final phase", &["phase", "expected", "rel_diff", "verdict"]);
    let rel = (res.final_phase - expected).abs() / expected.abs();
    phase.push(vec![num(res.final_phase), num(expected), num(rel)], Some(rel <= PHASE_TOL));
    r.tables.push(phase);

    let mut values = Table::new("value", &["source", "re", "im", "abs", "arg", "rel_diff", "verdict"]);
    let mut row = vec!["pipeline".to_string()];
    row.extend(value_cells(res.value));
    row.extend([num(res.error_estimate() / res.value.norm()), "-".into()]);
    values.push(row, None);
    let predicted = ex.predicted();
    let mut row = vec!["leading".to_string()];
    row.extend(value_cells(predicted));
    row.extend([num((predicted - res.value).norm() / res.value.norm()), "-".into()]);
    values.push(row, None);
    if ec.oracle {
        let o = quad_nd(&ex.integral, cfg.tol)?;
        let rel = (res.value - o.value).norm() / o.value.norm();
        let mut row = vec!["oracle".to_string()];
        row.extend(value_cells(o.value));
        row.push(num(rel));
        values.push(row, Some(rel <= ec.relative_tolerance));
        r.notes.push(format!(
            "oracle error estimate {} relative",
            num(o.error_estimate / o.value.norm())
        ));
    }
    r.tables.push(values);
    r.notes.push(format!(
        "P = {}, ratios = {:?}, n_max = {}; rel_diff of the pipeline row is its own error estimate, of the others their distance to the pipeline",
        num(ec.p),
        ec.ratios,
        cfg.n_max
    ));
    Ok(r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::parse_config;

    fn cfg(text: &str) -> RunConfig {
        parse_config(text).unwrap()
    }

    #[test]
    fn slope_of_a_power_law() {
        let pts: Vec<(f64, f64)> = [1.0f64, 10.0, 100.0].iter().map(|&x| (x, 3.0 * x.powf(-2.5))).collect();
        assert!((fitted_slope(&pts).unwrap() + 2.5).abs() < 1e-12);
        assert!(fitted_slope(&pts[..1]).is_none());
    }

    #[test]
    fn oracle_mode_sweeps() {
        let c = cfg(r#"{"mode": "oracle",
            "integral": {"phase": "k*x1", "weight": "1", "bounds": [[0, 1]],
                         "sweep": {"param": "k", "values": [0.5, 1]}}}"#);
        let r = run_config(&c).unwrap();
        assert_eq!(r.tables[0].rows.len(), 2);
        // ∫_0^1 e(x/2) dx = (e^{iπ} - 1)/(iπ) = 2i/π
        let sweep = r.sweep.as_ref().unwrap();
        assert!((sweep[0].1 - 2.0 / PI).abs() < 1e-12);
        assert!((sweep[0].2 - PI / 2.0).abs() < 1e-12);
        // ∫_0^1 e(x) dx = 0
        assert!(sweep[1].1 < 1e-12);
        assert!(r.passed());
    }

    #[test]
    fn compare_on_a_gaussian_phase() {
        let c = cfg(r#"{"mode": "compare", "n_max": 2, "tol": 1e-13,
            "integral": {"phase": "A*(x1-1.5)^2/(2*pi)", "weight": "bump(2*x1-3)", "bounds": [[1, 2]],
                         "sweep": {"param": "A", "values": [1000, 10000]}}}"#);
        let r = run_compare(&c).unwrap();
        assert!(r.passed(), "{}", r.text());
        assert_eq!(r.tables[0].rows[0][1], "Stationary");
    }

    #[test]
    fn compare_marks_nonstationary_phases() {
        let c = cfg(r#"{"mode": "compare",
            "integral": {"phase": "lam*x1/(2*pi)", "weight": "bump(2*x1-3)", "bounds": [[1, 2]],
                         "sweep": {"param": "lam", "values": [100, 1000]}}}"#);
        let r = run_compare(&c).unwrap();
        assert!(r.passed(), "{}", r.text());
        for row in &r.tables[0].rows {
            assert_eq!(row[1], "NonStationary");
        }
        assert_eq!(r.tables[0].rows[0][2], num(100.0));
    }

    #[test]
    fn eval_matches_the_library() {
        let c = cfg(r#"{"mode": "eval", "n_max": 1,
            "integral": {"phase": "50*(x1-1.5)^2 + 40*(x2-1.4)^2", "weight": "bump(2*x1-3)*bump(2*x2-3)",
                         "bounds": [[1, 2], [1, 2]], "order": [2, 1]}}"#);
        let r = run_config(&c).unwrap();
        let ic = c.integral().unwrap();
        let direct = pipeline::run(&ic.pipeline(&ic.params), 1).unwrap();
        assert_eq!(r.tables[0].rows[0][1], num(direct.value.re));
        assert!(r.sweep.is_none());
    }

    #[test]
    fn inert_check_with_fourier() {
        let c = cfg(r#"{"mode": "inert-check", "n_max": 0,
            "family": {"weight": "bump(2*x1/X1 - 3)", "params": {"X1": {"log": [1, 100]}},
                       "support": [["X1", "2*X1"]], "scale": "1",
                       "n_param_samples": 8, "n_point_samples": 32, "max_order": 2,
                       "fourier": {"var": 1, "grid": [0, 1, 2, 4, 8, 16, 32], "A": 5}}}"#);
        let r = run_config(&c).unwrap();
        assert_eq!(r.tables[0].rows.len(), 3);
        assert_eq!(r.tables[1].rows.len(), 7);
        assert!(r.passed(), "{}", r.text());
    }

    #[test]
    fn example_without_oracle() {
        let c = cfg(r#"{"mode": "example-ci", "example": {"P": 200, "oracle": false}}"#);
        let r = run_config(&c).unwrap();
        assert_eq!(r.tables[0].rows.len(), 3);
        assert!(r.passed(), "{}", r.text());
    }

    #[test]
    fn payload_mismatch_is_an_error() {
        let mut c = cfg(r#"{"mode": "example-ci", "example": {"P": 200, "oracle": false}}"#);
        c.mode = Mode::Oracle;
        assert!(run_config(&c).is_err());
    }
}
