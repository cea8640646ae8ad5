use std::sync::Arc;

use crate::compile::Program;
use crate::error::Result;
use crate::expr::{Expr, Params};
use crate::jet::Jet;
use crate::mjet::MJet;
use crate::series::{Series, C64};

/// Evaluates `expr` at `point`.
pub fn eval(expr: &Expr, point: &[f64], params: &Params) -> Result<C64> {
    let vars: Vec<C64> = point.iter().map(|&x| C64::new(x, 0.0)).collect();
    expr.eval_series(&vars, params, &C64::new(0.0, 0.0))
}

/// Taylor jet of `expr` in variable `var` at `point`, all other variables
/// frozen.
pub fn jet_of(expr: &Expr, var: usize, point: &[f64], params: &Params, order: usize) -> Result<Jet> {
    let proto = Jet::constant(point[var], order, C64::new(0.0, 0.0));
    let vars: Vec<Jet> = point
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            if i == var {
                Jet::variable(x, order)
            } else {
                Jet::constant(point[var], order, C64::new(x, 0.0))
            }
        })
        .collect();
    expr.eval_series(&vars, params, &proto)
}

/// Multivariate Taylor jet of `expr` in all variables at `point`.
pub fn mjet_of(expr: &Expr, point: &[f64], params: &Params, order: usize) -> Result<MJet> {
    let vars = variables(point, order);
    let proto = MJet::constant(point, order, C64::new(0.0, 0.0));
    expr.eval_series(&vars, params, &proto)
}

/// The coordinate functions at `point` as jets of the given order.
pub fn variables(point: &[f64], order: usize) -> Vec<MJet> {
    (0..point.len())
        .map(|i| MJet::variable(point, i, order))
        .collect()
}

/// `k!` times the k-th Taylor coefficient.
pub fn deriv(jet: &Jet, k: usize) -> Result<C64> {
    jet.deriv(k)
}

/// A function of `dim` real variables that can be evaluated pointwise and
/// composed with multivariate jets. Implemented by parameter-bound
/// expressions and by the numeric weights and phases that iterated
/// stationary phase produces.
pub trait SeriesFn: Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> Result<C64>;

    /// `f(inputs)` where `inputs[i]` is the jet of the i-th argument.
    fn series(&self, inputs: &[MJet]) -> Result<MJet>;

    /// Jet of `f` at `x`.
    fn mjet(&self, x: &[f64], order: usize) -> Result<MJet> {
        self.series(&variables(x, order))
    }

    /// Univariate jet in `var` at `x`.
    fn jet(&self, var: usize, x: &[f64], order: usize) -> Result<Jet> {
        let c = [x[var]];
        let inputs: Vec<MJet> = x
            .iter()
            .enumerate()
            .map(|(i, &xi)| {
                if i == var {
                    MJet::variable(&c, 0, order)
                } else {
                    MJet::constant(&c, order, C64::new(xi, 0.0))
                }
            })
            .collect();
        Ok(self.series(&inputs)?.restrict_to_var(0))
    }
}

/// An expression with all parameters substituted, plus a compiled form for
/// fast pointwise evaluation.
#[derive(Debug, Clone)]
pub struct BoundExpr {
    expr: Expr,
    dim: usize,
    program: Arc<Program>,
}

impl BoundExpr {
    pub fn new(expr: &Expr, params: &Params, dim: usize) -> Result<Self> {
        let expr = expr.bind(params)?;
        let dim = dim.max(expr.arity());
        let program = Arc::new(Program::compile(&expr)?);
        Ok(BoundExpr { expr, dim, program })
    }

    pub fn expr(&self) -> &Expr {
        &self.expr
    }

    pub fn program(&self) -> &Program {
        &self.program
    }
}

impl SeriesFn for BoundExpr {
    fn dim(&self) -> usize {
        self.dim
    }

    fn value(&self, x: &[f64]) -> Result<C64> {
        self.program.eval(x)
    }

    fn series(&self, inputs: &[MJet]) -> Result<MJet> {
        let proto = inputs[0].lift(C64::new(0.0, 0.0));
        self.expr.eval_series(inputs, &Params::new(), &proto)
    }

    fn jet(&self, var: usize, x: &[f64], order: usize) -> Result<Jet> {
        jet_of(&self.expr, var, x, &Params::new(), order)
    }
}
