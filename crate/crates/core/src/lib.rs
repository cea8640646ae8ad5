//! Uniform stationary-phase evaluation of oscillatory integrals
//! `∫ w(t) e^{iφ(t)} dt`, numerical certification of inert weight
//! families, and a brute-force oscillatory quadrature oracle to check both.

pub mod compile;
pub mod config;
pub mod error;
pub mod eval;
pub mod expansion;
pub mod expr;
pub mod inert;
pub mod jet;
pub mod mjet;
pub mod oracle;
pub mod parse;
pub mod pipeline;
pub mod report;
pub mod run;
pub mod series;
pub mod stationary;

pub use error::{Error, Result};
pub use eval::{deriv, eval, jet_of, mjet_of, BoundExpr, SeriesFn};
pub use expr::{Expr, Params};
pub use jet::Jet;
pub use mjet::{MJet, MultiIndex};
pub use parse::parse_expr;
pub use series::{Series, C64};
