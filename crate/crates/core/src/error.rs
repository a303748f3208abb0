//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot parse `{0}` as a rational (expected p/q or an integer)")]
    ParseRational(String),

    #[error("decimal literals are rejected, write an exact rational instead (e.g. `1/10000`): got `{0}`")]
    DecimalRejected(String),

    #[error("unbound variable `{0}`")]
    UnboundVariable(String),

    #[error("max/min node must have at least one child")]
    EmptyMaxMin(),

    #[error("s-expression parse error: {0}")]
    ParseExpr(String),

    #[error("unknown variable `{0}` for this polytope")]
    UnknownVariable(String),

    #[error("polytope is infeasible")]
    Infeasible,

    #[error("linear program is unbounded")]
    UnboundedLp,

    #[error("polytope is unbounded in variable `{0}`")]
    UnboundedPolytope(String),

    #[error("guard exceeded: {0}")]
    GuardExceeded(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("branch and vertex engines disagree: branch={branch} vertex={vertex}")]
    EngineDisagreement { branch: String, vertex: String },

    #[error("singular locus dimension indeterminate at this prime: {0}")]
    IndeterminateDimension(String),

    #[error("quadrature failed to converge: {0}")]
    QuadratureDiverged(String),

    #[error("malformed input: {0}")]
    MalformedInput(String),
}
