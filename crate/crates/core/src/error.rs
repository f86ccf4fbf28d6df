use thiserror::Error;

use crate::solver::TraceEntry;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("incompatible grids")]
    IncompatibleGrids,

    #[error("field has {got} values, grid has {expected} interior nodes")]
    FieldLength { expected: usize, got: usize },

    #[error("non-finite value {value} at node {index}")]
    NonFinite { index: usize, value: f64 },

    #[error("norm exponent must be at least 1, got {0}")]
    InvalidExponent(f64),

    #[error("factorization of the {grid} operator failed at pivot {pivot} (value {value:e})")]
    Factorization { grid: String, pivot: usize, value: f64 },

    #[error("linear solve did not reach tolerance: relative residual {residual:e}")]
    LinearSolve { residual: f64 },

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid nonlinearity: {0}")]
    InvalidNonlinearity(String),

    #[error("h′ singular at 0")]
    SingularDerivative,

    #[error("inversion of f did not converge at t = {t} (residual {residual:e})")]
    InverseNotConverged { t: f64, residual: f64 },

    #[error("ray does not cross 𝒩")]
    RayMissesNehari,

    #[error("not sign-changing")]
    NotSignChanging,

    #[error("bracket not found: {log}")]
    BracketNotFound { log: String },

    #[error("root solve failed to converge in [{lo}, {hi}]")]
    RootNotConverged { lo: f64, hi: f64 },

    #[error("w is not on the nodal set: defects {plus:e}, {minus:e}")]
    NotOnNodalSet { plus: f64, minus: f64 },

    #[error("all-zero field has no sign classification")]
    ZeroField,

    #[error("no run converged (best residual {best_residual:e} after {} iterations)", .trace.len())]
    NotConverged {
        best_residual: f64,
        trace: Vec<TraceEntry>,
    },

    #[error("all {starts} starts collapsed to a one-signed state")]
    SignCollapse { starts: usize },
}
