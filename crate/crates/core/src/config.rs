//! Run configuration for the command line front end.
//!
//! A config is one JSON document with a top-level `"mode"`. Expressions are
//! strings in the core grammar, and phases are written in the `e(x) = e^{2πix}`
//! normalisation: the loaded phase is multiplied by 2π before it reaches
//! the library, which works with `e^{iφ}`.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::Error;
use crate::expr::{Expr, Params};
use crate::inert::{FamilySpec, FamilyWeight, ParamRange};
use crate::oracle::IntegralSpec;
use crate::parse::parse_expr;
use crate::pipeline::{Ambient, PipelineSpec, StepScales};

pub const DEFAULT_ABS_FLOOR: f64 = 1e-12;
pub const DEFAULT_N_MAX: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Oracle,
    Eval,
    Compare,
    InertCheck,
    ExampleCi,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Oracle => "oracle",
            Mode::Eval => "eval",
            Mode::Compare => "compare",
            Mode::InertCheck => "inert-check",
            Mode::ExampleCi => "example-ci",
        }
    }

    pub fn from_name(s: &str) -> Option<Mode> {
        [Mode::Oracle, Mode::Eval, Mode::Compare, Mode::InertCheck, Mode::ExampleCi]
            .into_iter()
            .find(|m| m.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sweep {
    pub param: String,
    pub values: Vec<f64>,
}

/// An integral with its optional sweep and elimination plan.
#[derive(Debug, Clone, PartialEq)]
pub struct IntegralConfig {
    /// Phase in cycles, as written.
    pub phase: Expr,
    pub weight: Expr,
    pub bounds: Vec<(f64, f64)>,
    pub params: Params,
    pub sweep: Option<Sweep>,
    /// Elimination order, zero-based.
    pub order: Vec<usize>,
    pub scales: Vec<StepScales>,
}

impl IntegralConfig {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    /// Parameter values of each run: one per sweep value, or just the
    /// declared ones.
    pub fn points(&self) -> Vec<(Option<f64>, Params)> {
        match &self.sweep {
            None => vec![(None, self.params.clone())],
            Some(s) => s
                .values
                .iter()
                .map(|&v| {
                    let mut p = self.params.clone();
                    p.set(&s.param, v);
                    (Some(v), p)
                })
                .collect(),
        }
    }

    /// The integral at `params` with its phase in radians.
    pub fn integral(&self, params: &Params) -> IntegralSpec {
        IntegralSpec::new(
            Expr::Const(2.0 * PI) * self.phase.clone(),
            self.weight.clone(),
            self.bounds.clone(),
            params.clone(),
        )
    }

    pub fn pipeline(&self, params: &Params) -> PipelineSpec {
        let mut spec = PipelineSpec::new(self.integral(params), self.order.clone());
        spec.scales = self.scales.clone();
        spec
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FourierConfig {
    /// Zero-based.
    pub var: usize,
    pub grid: Vec<f64>,
    /// Defaults to the largest support scale of the reference member.
    pub q: Option<f64>,
    pub a: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FamilyConfig {
    pub weight: Expr,
    pub params: Vec<(String, ParamRange)>,
    pub support: Vec<(Expr, Expr)>,
    pub scale: Expr,
    pub max_order: usize,
    pub n_param_samples: usize,
    pub n_point_samples: usize,
    pub ceiling: Option<f64>,
    pub fourier: Option<FourierConfig>,
}

impl FamilyConfig {
    pub fn spec(&self) -> FamilySpec {
        FamilySpec::boxed(
            FamilyWeight::Expr(self.weight.clone()),
            self.params.clone(),
            self.support.clone(),
            self.scale.clone(),
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExampleConfig {
    pub p: f64,
    pub ratios: [f64; 3],
    pub q: f64,
    /// Also run the three-dimensional oracle.
    pub oracle: bool,
    pub relative_tolerance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Payload {
    Integral(IntegralConfig),
    Family(FamilyConfig),
    Example(ExampleConfig),
}

/// A validated run. Every optional setting is filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub mode: Mode,
    pub payload: Payload,
    /// Oracle tolerance.
    pub tol: f64,
    pub n_max: usize,
    pub seed: u64,
    pub out: Option<PathBuf>,
    pub abs_floor: f64,
}

impl RunConfig {
    pub fn integral(&self) -> Option<&IntegralConfig> {
        match &self.payload {
            Payload::Integral(i) => Some(i),
            _ => None,
        }
    }

    pub fn family(&self) -> Option<&FamilyConfig> {
        match &self.payload {
            Payload::Family(f) => Some(f),
            _ => None,
        }
    }

    pub fn example(&self) -> Option<&ExampleConfig> {
        match &self.payload {
            Payload::Example(e) => Some(e),
            _ => None,
        }
    }
}

// The document as written.

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    integral: Option<RawIntegral>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    family: Option<RawFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    example: Option<RawExample>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_max: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    abs_floor: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawIntegral {
    phase: String,
    weight: String,
    bounds: Vec<[f64; 2]>,
    #[serde(default)]
    params: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    sweep: Option<Sweep>,
    /// One-based variable numbers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    order: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    scales: Option<Vec<RawScales>>,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScales {
    z: f64,
    y: f64,
    x: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
enum RawRange {
    Interval([f64; 2]),
    Log([f64; 2]),
    List(Vec<f64>),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFamily {
    weight: String,
    #[serde(default)]
    params: BTreeMap<String, RawRange>,
    support: Vec<[String; 2]>,
    scale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_order: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_param_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n_point_samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    ceiling: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    fourier: Option<RawFourier>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFourier {
    /// One-based.
    var: usize,
    grid: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(rename = "A")]
    a: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawExample {
    #[serde(rename = "P")]
    p: f64,
    #[serde(default = "unit_ratios")]
    ratios: [f64; 3],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    q: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    oracle: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    relative_tolerance: Option<f64>,
}

fn unit_ratios() -> [f64; 3] {
    [1.0; 3]
}

/// Collects located errors while a raw document is checked.
struct Checker {
    errors: Vec<Error>,
}

impl Checker {
    fn schema(&mut self, path: &str, message: impl Into<String>) {
        self.errors.push(Error::Schema {
            path: path.to_string(),
            message: message.into(),
        });
    }

    fn expr(&mut self, path: &str, src: &str) -> Option<Expr> {
        match parse_expr(src) {
            Ok(e) => Some(e),
            Err(Error::Parse { line, column, message }) => {
                self.errors.push(Error::Parse {
                    line,
                    column,
                    message: format!("in `{path}`: {message}"),
                });
                None
            }
            Err(e) => {
                self.schema(path, e.to_string());
                None
            }
        }
    }

    fn bound(&mut self, path: &str, e: &Expr, names: &[&str]) {
        for p in e.params() {
            if !names.contains(&p.as_str()) {
                self.schema(path, format!("unbound parameter `{p}`"));
            }
        }
    }

    fn vars(&mut self, path: &str, e: &Expr, dim: usize) {
        if e.arity() > dim {
            self.schema(path, format!("uses x{} but there are {dim} variables", e.arity()));
        }
    }

    fn positive(&mut self, path: &str, v: f64) {
        if !(v > 0.0 && v.is_finite()) {
            self.schema(path, format!("must be positive and finite, got {v}"));
        }
    }
}

/// Parses and validates a config document. Either the whole document is
/// accepted or every problem found is returned.
pub fn parse_config(text: &str) -> std::result::Result<RunConfig, Vec<Error>> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let raw: RawConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        vec![Error::Schema {
            path,
            message: e.into_inner().to_string(),
        }]
    })?;
    let mut ck = Checker { errors: Vec::new() };
    let present = [
        ("integral", raw.integral.is_some()),
        ("family", raw.family.is_some()),
        ("example", raw.example.is_some()),
    ];
    let wanted = match raw.mode {
        Mode::Oracle | Mode::Eval | Mode::Compare => "integral",
        Mode::InertCheck => "family",
        Mode::ExampleCi => "example",
    };
    for (key, has) in present {
        if key == wanted && !has {
            ck.schema(key, format!("required in mode {}", raw.mode.name()));
        } else if key != wanted && has {
            ck.schema(key, format!("not used in mode {}", raw.mode.name()));
        }
    }
    let payload = if let Some(i) = &raw.integral {
        integral(&mut ck, i).map(Payload::Integral)
    } else if let Some(f) = &raw.family {
        family(&mut ck, f).map(Payload::Family)
    } else {
        raw.example.as_ref().and_then(|e| example(&mut ck, e)).map(Payload::Example)
    };
    if let Some(t) = raw.tol {
        ck.positive("tol", t);
    }
    if let Some(f) = raw.abs_floor {
        if !(f >= 0.0 && f.is_finite()) {
            ck.schema("abs_floor", format!("must be non-negative, got {f}"));
        }
    }
    if let Some(n) = raw.n_max {
        if n > crate::expansion::MAX_TERMS {
            ck.schema("n_max", format!("at most {} terms are supported", crate::expansion::MAX_TERMS));
        }
    }
    match payload {
        Some(payload) if ck.errors.is_empty() => {
            let tol = raw.tol.unwrap_or_else(|| default_tol(&payload));
            let n_max = raw.n_max.unwrap_or(match payload {
                Payload::Example(_) => 1,
                _ => DEFAULT_N_MAX,
            });
            Ok(RunConfig {
                mode: raw.mode,
                payload,
                tol,
                n_max,
                seed: raw.seed.unwrap_or(0),
                out: raw.out,
                abs_floor: raw.abs_floor.unwrap_or(DEFAULT_ABS_FLOOR),
            })
        }
        _ => Err(ck.errors),
    }
}

/// Oracle tolerance when none is given: tight in one variable, looser as
/// nested quadrature gets more expensive.
fn default_tol(payload: &Payload) -> f64 {
    match payload {
        Payload::Integral(i) => match i.dim() {
            1 => 1e-8,
            2 => 1e-6,
            _ => 1e-4,
        },
        Payload::Family(_) => 1e-12,
        Payload::Example(_) => 1e-4,
    }
}

fn integral(ck: &mut Checker, raw: &RawIntegral) -> Option<IntegralConfig> {
    let d = raw.bounds.len();
    if d == 0 {
        ck.schema("integral.bounds", "at least one variable is needed");
    }
    for (i, [a, b]) in raw.bounds.iter().enumerate() {
        if !(a.is_finite() && b.is_finite() && a < b) {
            ck.schema(&format!("integral.bounds[{i}]"), format!("[{a}, {b}] is not an interval"));
        }
    }
    for (name, v) in &raw.params {
        if !v.is_finite() {
            ck.schema(&format!("integral.params.{name}"), "must be finite");
        }
    }
    let mut names: Vec<&str> = raw.params.keys().map(String::as_str).collect();
    if let Some(s) = &raw.sweep {
        if s.values.is_empty() {
            ck.schema("integral.sweep.values", "at least one value is needed");
        }
        if s.values.iter().any(|v| !v.is_finite()) {
            ck.schema("integral.sweep.values", "values must be finite");
        }
        names.push(&s.param);
    }
    let phase = ck.expr("integral.phase", &raw.phase);
    let weight = ck.expr("integral.weight", &raw.weight);
    for (path, e) in [("integral.phase", &phase), ("integral.weight", &weight)] {
        if let Some(e) = e {
            ck.bound(path, e, &names);
            ck.vars(path, e, d);
        }
    }
    if let Some(p) = &phase {
        if !p.is_real() {
            ck.schema("integral.phase", "the phase must be real");
        }
    }
    let order = match &raw.order {
        None => (0..d).collect(),
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort_unstable();
            if sorted != (1..=d).collect::<Vec<_>>() {
                ck.schema("integral.order", format!("must list each of x1..x{d} once"));
            }
            o.iter().map(|v| v.saturating_sub(1)).collect()
        }
    };
    let scales = match &raw.scales {
        None => vec![StepScales::Auto; d],
        Some(s) => {
            if s.len() != d {
                ck.schema("integral.scales", format!("need one entry per step, {d} in all"));
            }
            for (i, sc) in s.iter().enumerate() {
                for (n, v) in [("z", sc.z), ("y", sc.y), ("x", sc.x)] {
                    ck.positive(&format!("integral.scales[{i}].{n}"), v);
                }
            }
            s.iter().map(|sc| StepScales::Fixed { z: sc.z, y: sc.y, x: sc.x }).collect()
        }
    };
    Some(IntegralConfig {
        phase: phase?,
        weight: weight?,
        bounds: raw.bounds.iter().map(|b| (b[0], b[1])).collect(),
        params: raw.params.iter().map(|(k, v)| (k.as_str(), *v)).collect(),
        sweep: raw.sweep.clone(),
        order,
        scales,
    })
}

fn family(ck: &mut Checker, raw: &RawFamily) -> Option<FamilyConfig> {
    let d = raw.support.len();
    if d == 0 {
        ck.schema("family.support", "at least one variable is needed");
    }
    let mut params = Vec::new();
    for (name, r) in &raw.params {
        let path = format!("family.params.{name}");
        let range = match r {
            RawRange::Interval([a, b]) => {
                if !(a.is_finite() && b.is_finite() && a <= b) {
                    ck.schema(&path, format!("[{a}, {b}] is not an interval"));
                }
                ParamRange::Interval(*a, *b)
            }
            RawRange::Log([a, b]) => {
                if !(*a > 0.0 && b.is_finite() && a <= b) {
                    ck.schema(&path, format!("[{a}, {b}] is not a positive interval"));
                }
                ParamRange::LogInterval(*a, *b)
            }
            RawRange::List(v) => {
                if v.is_empty() || v.iter().any(|x| !x.is_finite()) {
                    ck.schema(&path, "needs at least one finite value");
                }
                ParamRange::List(v.clone())
            }
        };
        params.push((name.clone(), range));
    }
    let names: Vec<&str> = raw.params.keys().map(String::as_str).collect();
    let checked = |ck: &mut Checker, path: &str, src: &str, dim: usize| {
        let e = ck.expr(path, src)?;
        ck.bound(path, &e, &names);
        ck.vars(path, &e, dim);
        Some(e)
    };
    let weight = checked(ck, "family.weight", &raw.weight, d);
    let scale = checked(ck, "family.scale", &raw.scale, 0);
    let mut support = Vec::new();
    for (i, [lo, hi]) in raw.support.iter().enumerate() {
        let lo = checked(ck, &format!("family.support[{i}][0]"), lo, 0);
        let hi = checked(ck, &format!("family.support[{i}][1]"), hi, 0);
        support.push(lo.zip(hi));
    }
    let max_order = raw.max_order.unwrap_or(3);
    if max_order > crate::inert::MAX_ORDER {
        ck.schema("family.max_order", format!("at most {}", crate::inert::MAX_ORDER));
    }
    for (n, v) in [("n_param_samples", raw.n_param_samples), ("n_point_samples", raw.n_point_samples)] {
        if v == Some(0) {
            ck.schema(&format!("family.{n}"), "must be at least 1");
        }
    }
    if let Some(c) = raw.ceiling {
        ck.positive("family.ceiling", c);
    }
    let fourier = raw.fourier.as_ref().map(|f| {
        if !(1..=d).contains(&f.var) {
            ck.schema("family.fourier.var", format!("must be one of 1..{d}"));
        }
        if f.grid.is_empty() || f.grid.iter().any(|t| !t.is_finite()) {
            ck.schema("family.fourier.grid", "needs at least one finite frequency");
        }
        ck.positive("family.fourier.A", f.a);
        if let Some(q) = f.q {
            if !(q >= 1.0 && q.is_finite()) {
                ck.schema("family.fourier.q", format!("must be at least 1, got {q}"));
            }
        }
        FourierConfig {
            var: f.var.saturating_sub(1),
            grid: f.grid.clone(),
            q: f.q,
            a: f.a,
        }
    });
    Some(FamilyConfig {
        weight: weight?,
        params,
        support: support.into_iter().collect::<Option<_>>()?,
        scale: scale?,
        max_order,
        n_param_samples: raw.n_param_samples.unwrap_or(64),
        n_point_samples: raw.n_point_samples.unwrap_or(16),
        ceiling: raw.ceiling,
        fourier,
    })
}

fn example(ck: &mut Checker, raw: &RawExample) -> Option<ExampleConfig> {
    if !(raw.p >= 50.0 && raw.p.is_finite()) {
        ck.schema("example.P", format!("must be at least 50, got {}", raw.p));
    }
    for (i, r) in raw.ratios.iter().enumerate() {
        ck.positive(&format!("example.ratios[{i}]"), *r);
    }
    let q = raw.q.unwrap_or(Ambient::DEFAULT_Q);
    ck.positive("example.q", q);
    let relative_tolerance = raw.relative_tolerance.unwrap_or(0.15);
    ck.positive("example.relative_tolerance", relative_tolerance);
    Some(ExampleConfig {
        p: raw.p,
        ratios: raw.ratios,
        q,
        oracle: raw.oracle.unwrap_or(true),
        relative_tolerance,
    })
}

/// The config as a JSON document that [`parse_config`] maps back to it.
pub fn render(cfg: &RunConfig) -> String {
    let mut raw = RawConfig {
        mode: cfg.mode,
        integral: None,
        family: None,
        example: None,
        tol: Some(cfg.tol),
        n_max: Some(cfg.n_max),
        seed: Some(cfg.seed),
        out: cfg.out.clone(),
        abs_floor: Some(cfg.abs_floor),
    };
    match &cfg.payload {
        Payload::Integral(i) => {
            let all_auto = i.scales.iter().all(|s| *s == StepScales::Auto);
            raw.integral = Some(RawIntegral {
                phase: i.phase.to_string(),
                weight: i.weight.to_string(),
                bounds: i.bounds.iter().map(|&(a, b)| [a, b]).collect(),
                params: i.params.iter().map(|(k, v)| (k.to_string(), v)).collect(),
                sweep: i.sweep.clone(),
                order: Some(i.order.iter().map(|v| v + 1).collect()),
                scales: (!all_auto).then(|| {
                    i.scales
                        .iter()
                        .map(|s| match *s {
                            StepScales::Fixed { z, y, x } => RawScales { z, y, x },
                            // mixed plans cannot be written; fall back to unit scales
                            StepScales::Auto => RawScales { z: 1.0, y: 1.0, x: 1.0 },
                        })
                        .collect()
                }),
            });
        }
        Payload::Family(f) => {
            raw.family = Some(RawFamily {
                weight: f.weight.to_string(),
                params: f
                    .params
                    .iter()
                    .map(|(n, r)| {
                        let r = match r {
                            ParamRange::Interval(a, b) => RawRange::Interval([*a, *b]),
                            ParamRange::LogInterval(a, b) => RawRange::Log([*a, *b]),
                            ParamRange::List(v) => RawRange::List(v.clone()),
                        };
                        (n.clone(), r)
                    })
                    .collect(),
                support: f.support.iter().map(|(a, b)| [a.to_string(), b.to_string()]).collect(),
                scale: f.scale.to_string(),
                max_order: Some(f.max_order),
                n_param_samples: Some(f.n_param_samples),
                n_point_samples: Some(f.n_point_samples),
                ceiling: f.ceiling,
                fourier: f.fourier.as_ref().map(|c| RawFourier {
                    var: c.var + 1,
                    grid: c.grid.clone(),
                    q: c.q,
                    a: c.a,
                }),
            });
        }
        Payload::Example(e) => {
            raw.example = Some(RawExample {
                p: e.p,
                ratios: e.ratios,
                q: Some(e.q),
                oracle: Some(e.oracle),
                relative_tolerance: Some(e.relative_tolerance),
            });
        }
    }
    serde_json::to_string_pretty(&raw).expect("config serialises")
}
