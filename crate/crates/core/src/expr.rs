use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::ops;

use crate::error::{Error, Result};
use crate::series::{Series, C64};

/// Expression tree over variables `x1..xd` (zero-based indices here) and
/// named parameters.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Var(usize),
    Param(String),
    Const(f64),
    /// The imaginary unit.
    Imag,
    Add(Box<Expr>, Box<Expr>),
    Sub(Box<Expr>, Box<Expr>),
    Mul(Box<Expr>, Box<Expr>),
    Div(Box<Expr>, Box<Expr>),
    Neg(Box<Expr>),
    /// `base ^ exponent`; the exponent must not depend on any variable.
    Pow(Box<Expr>, Box<Expr>),
    Exp(Box<Expr>),
    Log(Box<Expr>),
    Sqrt(Box<Expr>),
    Sin(Box<Expr>),
    Cos(Box<Expr>),
    /// `b(u) = exp(-1/(1-u^2))` for `|u| < 1`, zero otherwise.
    Bump(Box<Expr>),
}

/// Named real parameter values.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Params(BTreeMap<String, f64>);

impl Params {
    pub fn new() -> Self {
        Params::default()
    }

    pub fn with(mut self, name: &str, value: f64) -> Self {
        self.0.insert(name.to_string(), value);
        self
    }

    pub fn set(&mut self, name: &str, value: f64) {
        self.0.insert(name.to_string(), value);
    }

    pub fn get(&self, name: &str) -> Option<f64> {
        self.0.get(name).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.0.iter().map(|(k, &v)| (k.as_str(), v))
    }

    /// Union of two parameter sets; entries of `other` win.
    pub fn merged(&self, other: &Params) -> Params {
        let mut out = self.clone();
        for (k, v) in other.iter() {
            out.set(k, v);
        }
        out
    }
}

impl<'a> FromIterator<(&'a str, f64)> for Params {
    fn from_iter<I: IntoIterator<Item = (&'a str, f64)>>(iter: I) -> Self {
        Params(iter.into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }
}

fn bx(e: Expr) -> Box<Expr> {
    Box::new(e)
}

impl Expr {
    pub fn var(i: usize) -> Expr {
        Expr::Var(i)
    }

    pub fn param(name: &str) -> Expr {
        Expr::Param(name.to_string())
    }

    pub fn constant(c: f64) -> Expr {
        Expr::Const(c)
    }

    pub fn pow(self, exponent: Expr) -> Expr {
        Expr::Pow(bx(self), bx(exponent))
    }

    pub fn powf(self, p: f64) -> Expr {
        self.pow(Expr::Const(p))
    }

    pub fn exp(self) -> Expr {
        Expr::Exp(bx(self))
    }

    pub fn log(self) -> Expr {
        Expr::Log(bx(self))
    }

    pub fn sqrt(self) -> Expr {
        Expr::Sqrt(bx(self))
    }

    pub fn sin(self) -> Expr {
        Expr::Sin(bx(self))
    }

    pub fn cos(self) -> Expr {
        Expr::Cos(bx(self))
    }

    pub fn bump(self) -> Expr {
        Expr::Bump(bx(self))
    }

    /// The bump atom rescaled to the interval `[a, b]`.
    pub fn bump_on(var: usize, a: f64, b: f64) -> Expr {
        let mid = 0.5 * (a + b);
        let half = 0.5 * (b - a);
        ((Expr::Var(var) - Expr::Const(mid)) / Expr::Const(half)).bump()
    }

    fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Var(_) | Expr::Param(_) | Expr::Const(_) | Expr::Imag => vec![],
            Expr::Add(a, b)
            | Expr::Sub(a, b)
            | Expr::Mul(a, b)
            | Expr::Div(a, b)
            | Expr::Pow(a, b) => vec![a, b],
            Expr::Neg(a)
            | Expr::Exp(a)
            | Expr::Log(a)
            | Expr::Sqrt(a)
            | Expr::Sin(a)
            | Expr::Cos(a)
            | Expr::Bump(a) => vec![a],
        }
    }

    /// Rebuilds the tree bottom-up, letting `f` replace leaves.
    fn map_leaves(&self, f: &mut impl FnMut(&Expr) -> Option<Expr>) -> Expr {
        if let Some(e) = f(self) {
            return e;
        }
        match self {
            Expr::Var(_) | Expr::Param(_) | Expr::Const(_) | Expr::Imag => self.clone(),
            Expr::Add(a, b) => Expr::Add(bx(a.map_leaves(f)), bx(b.map_leaves(f))),
            Expr::Sub(a, b) => Expr::Sub(bx(a.map_leaves(f)), bx(b.map_leaves(f))),
            Expr::Mul(a, b) => Expr::Mul(bx(a.map_leaves(f)), bx(b.map_leaves(f))),
            Expr::Div(a, b) => Expr::Div(bx(a.map_leaves(f)), bx(b.map_leaves(f))),
            Expr::Pow(a, b) => Expr::Pow(bx(a.map_leaves(f)), bx(b.map_leaves(f))),
            Expr::Neg(a) => Expr::Neg(bx(a.map_leaves(f))),
            Expr::Exp(a) => Expr::Exp(bx(a.map_leaves(f))),
            Expr::Log(a) => Expr::Log(bx(a.map_leaves(f))),
            Expr::Sqrt(a) => Expr::Sqrt(bx(a.map_leaves(f))),
            Expr::Sin(a) => Expr::Sin(bx(a.map_leaves(f))),
            Expr::Cos(a) => Expr::Cos(bx(a.map_leaves(f))),
            Expr::Bump(a) => Expr::Bump(bx(a.map_leaves(f))),
        }
    }

    fn visit(&self, f: &mut impl FnMut(&Expr)) {
        f(self);
        for c in self.children() {
            c.visit(f);
        }
    }

    /// Names of all parameters referenced by the tree.
    pub fn params(&self) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        self.visit(&mut |e| {
            if let Expr::Param(p) = e {
                out.insert(p.clone());
            }
        });
        out
    }

    /// One more than the largest variable index used (0 if none).
    pub fn arity(&self) -> usize {
        let mut n = 0;
        self.visit(&mut |e| {
            if let Expr::Var(i) = e {
                n = n.max(i + 1);
            }
        });
        n
    }

    pub fn depends_on(&self, var: usize) -> bool {
        let mut found = false;
        self.visit(&mut |e| found |= *e == Expr::Var(var));
        found
    }

    pub fn has_vars(&self) -> bool {
        self.arity() > 0
    }

    /// True when the tree contains no imaginary unit, so real inputs give
    /// real outputs.
    pub fn is_real(&self) -> bool {
        let mut real = true;
        self.visit(&mut |e| real &= *e != Expr::Imag);
        real
    }

    /// Replaces every parameter by its value.
    pub fn bind(&self, params: &Params) -> Result<Expr> {
        for p in self.params() {
            if params.get(&p).is_none() {
                return Err(Error::UnboundParameter(p));
            }
        }
        Ok(self.map_leaves(&mut |e| match e {
            Expr::Param(p) => params.get(p).map(Expr::Const),
            _ => None,
        }))
    }

    /// Replaces the listed parameters by values, leaving others symbolic.
    pub fn bind_partial(&self, params: &Params) -> Expr {
        self.map_leaves(&mut |e| match e {
            Expr::Param(p) => params.get(p).map(Expr::Const),
            _ => None,
        })
    }

    /// Replaces variable `i` by `subs[i]` for every `i < subs.len()`.
    pub fn substitute_vars(&self, subs: &[Expr]) -> Expr {
        self.map_leaves(&mut |e| match e {
            Expr::Var(i) if *i < subs.len() => Some(subs[*i].clone()),
            _ => None,
        })
    }

    /// Renames variables through `map`, which must be total on used indices.
    pub fn reindex_vars(&self, map: impl Fn(usize) -> usize) -> Expr {
        self.map_leaves(&mut |e| match e {
            Expr::Var(i) => Some(Expr::Var(map(*i))),
            _ => None,
        })
    }

    pub fn rename_params(&self, rename: impl Fn(&str) -> String) -> Expr {
        self.map_leaves(&mut |e| match e {
            Expr::Param(p) => Some(Expr::Param(rename(p))),
            _ => None,
        })
    }

    /// Evaluates the tree in any series arithmetic. `vars[i]` supplies
    /// variable `i`; `proto` fixes the shape of lifted constants.
    pub fn eval_series<S: Series>(&self, vars: &[S], params: &Params, proto: &S) -> Result<S> {
        let ev = |e: &Expr| e.eval_series(vars, params, proto);
        Ok(match self {
            Expr::Var(i) => vars
                .get(*i)
                .cloned()
                .ok_or_else(|| Error::InvalidInput(format!("variable x{} not supplied", i + 1)))?,
            Expr::Param(p) => proto.lift(C64::new(
                params
                    .get(p)
                    .ok_or_else(|| Error::UnboundParameter(p.clone()))?,
                0.0,
            )),
            Expr::Const(c) => proto.lift(C64::new(*c, 0.0)),
            Expr::Imag => proto.lift(C64::new(0.0, 1.0)),
            Expr::Add(a, b) => ev(a)?.add(&ev(b)?),
            Expr::Sub(a, b) => ev(a)?.sub(&ev(b)?),
            Expr::Mul(a, b) => ev(a)?.mul(&ev(b)?),
            Expr::Div(a, b) => ev(a)?.div(&ev(b)?)?,
            Expr::Neg(a) => ev(a)?.neg(),
            Expr::Pow(a, b) => {
                let p = b.constant_exponent(params)?;
                ev(a)?.powf(p)?
            }
            Expr::Exp(a) => ev(a)?.exp(),
            Expr::Log(a) => ev(a)?.ln()?,
            Expr::Sqrt(a) => ev(a)?.sqrt()?,
            Expr::Sin(a) => ev(a)?.sin(),
            Expr::Cos(a) => ev(a)?.cos(),
            Expr::Bump(a) => ev(a)?.bump()?,
        })
    }

    pub(crate) fn constant_exponent(&self, params: &Params) -> Result<f64> {
        if self.has_vars() {
            return Err(Error::InvalidInput(format!(
                "exponent `{self}` depends on a variable"
            )));
        }
        let v: C64 = self.eval_series(&[], params, &C64::new(0.0, 0.0))?;
        if v.im != 0.0 {
            return Err(Error::domain("power", v));
        }
        Ok(v.re)
    }
}

macro_rules! binop {
    ($tr:ident, $method:ident, $variant:ident) => {
        impl ops::$tr for Expr {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(bx(self), bx(rhs))
            }
        }
        impl ops::$tr<f64> for Expr {
            type Output = Expr;
            fn $method(self, rhs: f64) -> Expr {
                Expr::$variant(bx(self), bx(Expr::Const(rhs)))
            }
        }
        impl ops::$tr<Expr> for f64 {
            type Output = Expr;
            fn $method(self, rhs: Expr) -> Expr {
                Expr::$variant(bx(Expr::Const(self)), bx(rhs))
            }
        }
    };
}

binop!(Add, add, Add);
binop!(Sub, sub, Sub);
binop!(Mul, mul, Mul);
binop!(Div, div, Div);

impl ops::Neg for Expr {
    type Output = Expr;
    fn neg(self) -> Expr {
        Expr::Neg(bx(self))
    }
}

/// Renders in the text grammar accepted by [`parse_expr`](crate::parse_expr);
/// parsing the output reproduces the tree exactly.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Param(p) => write!(f, "{p}"),
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{:?})", -c)
            }
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Imag => write!(f, "I"),
            Expr::Add(a, b) => write!(f, "({a} + {b})"),
            Expr::Sub(a, b) => write!(f, "({a} - {b})"),
            Expr::Mul(a, b) => write!(f, "({a} * {b})"),
            Expr::Div(a, b) => write!(f, "({a} / {b})"),
            Expr::Neg(a) => write!(f, "(-({a}))"),
            Expr::Pow(a, b) => write!(f, "({a} ^ {b})"),
            Expr::Exp(a) => write!(f, "exp({a})"),
            Expr::Log(a) => write!(f, "log({a})"),
            Expr::Sqrt(a) => write!(f, "sqrt({a})"),
            Expr::Sin(a) => write!(f, "sin({a})"),
            Expr::Cos(a) => write!(f, "cos({a})"),
            Expr::Bump(a) => write!(f, "bump({a})"),
        }
    }
}
