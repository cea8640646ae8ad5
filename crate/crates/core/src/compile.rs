//! Flat stack programs for fast pointwise evaluation of bound expressions.

use crate::error::{Error, Result};
use crate::expr::{Expr, Params};
use crate::series::{bump_value, integer_exponent, Series, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
enum Op {
    Var(usize),
    Const(C64),
    Add,
    Sub,
    Mul,
    Div,
    Neg,
    Powi(i32),
    Powf(f64),
    Exp,
    Log,
    Sqrt,
    Sin,
    Cos,
    Bump,
}

/// A parameter-free expression compiled to postfix form with constant
/// subtrees folded.
#[derive(Debug, Clone)]
pub struct Program {
    ops: Vec<Op>,
    depth: usize,
    real: bool,
}

const INLINE_STACK: usize = 48;

impl Program {
    pub fn compile(expr: &Expr) -> Result<Program> {
        let mut ops = Vec::new();
        emit(expr, &mut ops)?;
        let mut depth = 0usize;
        let mut max_depth = 0usize;
        for op in &ops {
            match op {
                Op::Var(_) | Op::Const(_) => depth += 1,
                Op::Add | Op::Sub | Op::Mul | Op::Div => depth -= 1,
                _ => {}
            }
            max_depth = max_depth.max(depth);
        }
        let real = ops.iter().all(|op| match op {
            Op::Const(c) => c.im == 0.0,
            _ => true,
        });
        Ok(Program {
            ops,
            depth: max_depth,
            real,
        })
    }

    /// True when the program maps real inputs to real outputs.
    pub fn is_real(&self) -> bool {
        self.real
    }

    pub fn eval(&self, x: &[f64]) -> Result<C64> {
        if self.real {
            return self.eval_real(x).map(|v| C64::new(v, 0.0));
        }
        let mut stack = Vec::with_capacity(self.depth);
        for op in &self.ops {
            match *op {
                Op::Var(i) => stack.push(C64::new(var(x, i)?, 0.0)),
                Op::Const(c) => stack.push(c),
                Op::Add | Op::Sub | Op::Mul | Op::Div => {
                    let b = stack.pop().unwrap();
                    let a = stack.pop().unwrap();
                    stack.push(match op {
                        Op::Add => a + b,
                        Op::Sub => a - b,
                        Op::Mul => a * b,
                        _ => a.div(&b)?,
                    });
                }
                _ => {
                    let a = stack.pop().unwrap();
                    stack.push(match *op {
                        Op::Neg => -a,
                        Op::Powi(m) => Series::powf(&a, m as f64)?,
                        Op::Powf(p) => Series::powf(&a, p)?,
                        Op::Exp => a.exp(),
                        Op::Log => Series::ln(&a)?,
                        Op::Sqrt => Series::sqrt(&a)?,
                        Op::Sin => a.sin(),
                        Op::Cos => a.cos(),
                        Op::Bump => Series::bump(&a)?,
                        _ => unreachable!(),
                    });
                }
            }
        }
        Ok(stack[0])
    }

    /// Real evaluation; an error if the program contains complex constants.
    pub fn eval_real(&self, x: &[f64]) -> Result<f64> {
        if !self.real {
            return Err(Error::InvalidInput("expression is complex-valued".into()));
        }
        if self.depth <= INLINE_STACK {
            let mut stack = [0.0; INLINE_STACK];
            self.run_real(x, &mut stack)
        } else {
            let mut stack = vec![0.0; self.depth];
            self.run_real(x, &mut stack)
        }
    }

    fn run_real(&self, x: &[f64], stack: &mut [f64]) -> Result<f64> {
        let mut sp = 0usize;
        for op in &self.ops {
            match *op {
                Op::Var(i) => {
                    stack[sp] = var(x, i)?;
                    sp += 1;
                }
                Op::Const(c) => {
                    stack[sp] = c.re;
                    sp += 1;
                }
                Op::Add => {
                    sp -= 1;
                    stack[sp - 1] += stack[sp];
                }
                Op::Sub => {
                    sp -= 1;
                    stack[sp - 1] -= stack[sp];
                }
                Op::Mul => {
                    sp -= 1;
                    stack[sp - 1] *= stack[sp];
                }
                Op::Div => {
                    sp -= 1;
                    if stack[sp] == 0.0 {
                        return Err(Error::domain("division", 0.0));
                    }
                    stack[sp - 1] /= stack[sp];
                }
                _ => {
                    let a = stack[sp - 1];
                    stack[sp - 1] = match *op {
                        Op::Neg => -a,
                        Op::Powi(m) => {
                            if m < 0 && a == 0.0 {
                                return Err(Error::domain("power", a));
                            }
                            a.powi(m)
                        }
                        Op::Powf(p) => positive(a, "power")?.powf(p),
                        Op::Exp => a.exp(),
                        Op::Log => positive(a, "log")?.ln(),
                        Op::Sqrt => positive(a, "sqrt")?.sqrt(),
                        Op::Sin => a.sin(),
                        Op::Cos => a.cos(),
                        Op::Bump => bump_value(a),
                        _ => unreachable!(),
                    };
                }
            }
        }
        Ok(stack[0])
    }
}

fn var(x: &[f64], i: usize) -> Result<f64> {
    x.get(i)
        .copied()
        .ok_or_else(|| Error::InvalidInput(format!("variable x{} not supplied", i + 1)))
}

fn positive(a: f64, op: &'static str) -> Result<f64> {
    if a > 0.0 {
        Ok(a)
    } else {
        Err(Error::domain(op, a))
    }
}

fn emit(e: &Expr, ops: &mut Vec<Op>) -> Result<()> {
    if !e.has_vars() {
        let v: C64 = e.eval_series(&[], &Params::new(), &C64::new(0.0, 0.0))?;
        ops.push(Op::Const(v));
        return Ok(());
    }
    match e {
        Expr::Var(i) => ops.push(Op::Var(*i)),
        Expr::Param(p) => return Err(Error::UnboundParameter(p.clone())),
        Expr::Const(_) | Expr::Imag => unreachable!("constants are folded above"),
        Expr::Add(a, b) | Expr::Sub(a, b) | Expr::Mul(a, b) | Expr::Div(a, b) => {
            emit(a, ops)?;
            emit(b, ops)?;
            ops.push(match e {
                Expr::Add(..) => Op::Add,
                Expr::Sub(..) => Op::Sub,
                Expr::Mul(..) => Op::Mul,
                _ => Op::Div,
            });
        }
        Expr::Pow(a, b) => {
            let p = b.constant_exponent(&Params::new())?;
            emit(a, ops)?;
            ops.push(match integer_exponent(p) {
                Some(m) => Op::Powi(m),
                None if p == 0.5 => Op::Sqrt,
                None => Op::Powf(p),
            });
        }
        Expr::Neg(a)
        | Expr::Exp(a)
        | Expr::Log(a)
        | Expr::Sqrt(a)
        | Expr::Sin(a)
        | Expr::Cos(a)
        | Expr::Bump(a) => {
            emit(a, ops)?;
            ops.push(match e {
                Expr::Neg(_) => Op::Neg,
                Expr::Exp(_) => Op::Exp,
                Expr::Log(_) => Op::Log,
                Expr::Sqrt(_) => Op::Sqrt,
                Expr::Sin(_) => Op::Sin,
                Expr::Cos(_) => Op::Cos,
                _ => Op::Bump,
            });
        }
    }
    Ok(())
}
