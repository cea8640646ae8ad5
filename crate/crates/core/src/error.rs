use thiserror::Error;

/// Every failure mode of the library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("unbound parameter `{0}`")]
    UnboundParameter(String),

    #[error("{op} evaluated outside its domain (argument {arg})")]
    DomainViolation { op: &'static str, arg: String },

    #[error("derivative order {k} exceeds jet order {order}")]
    OrderExceeded { k: usize, order: usize },

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("weight is {value:e} at {point:?}, outside its declared support")]
    SupportViolation { point: Vec<f64>, value: f64 },

    #[error("parameter `{0}` appears in both families")]
    NameCollision(String),

    #[error("Newton iteration for the stationary point did not converge after {iterations} steps")]
    NoConvergence { iterations: usize },

    #[error("stationary point is singular: |phi''(t0)| = {curvature:e} below {threshold:e}")]
    SingularImplicit { curvature: f64, threshold: f64 },

    #[error("consistency check failed: {0}")]
    AssertionFailure(String),

    #[error("quadrature failure: {0}")]
    QuadratureFailure(String),

    #[error("step {step} (variable x{var}) violates the stationary-phase hypotheses: {reason}")]
    StepHypothesisViolation {
        step: usize,
        var: usize,
        reason: String,
    },

    #[error("phase is not stationary on the interval: {0}")]
    NotStationary(String),

    #[error("schema error at `{path}`: {message}")]
    Schema { path: String, message: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn domain(op: &'static str, arg: impl std::fmt::Display) -> Self {
        Error::DomainViolation {
            op,
            arg: arg.to_string(),
        }
    }
}
