use std::fmt;

use crate::solvers::SolveReport;

/// Errors produced by the solver library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("model violates assumptions: {0}")]
    AssumptionsViolated(Violations),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("certainty equivalent of an empty distribution")]
    EmptySupport,

    #[error("positive part of the increment is not integrable")]
    NonintegrableTail,

    #[error("retained surplus {u} lies beyond the grid end {x_max}")]
    GridTooShort { u: f64, x_max: f64 },

    #[error("no convergence after {} iterations (residual {:.3e})", .0.iterations, .0.final_residual)]
    MaxIterExceeded(Box<SolveReport>),

    #[error("precondition violated: {0}")]
    PreconditionViolated(String),

    #[error("policy is not band structured at node {node} (x = {x})")]
    NotBandStructured { node: usize, x: f64 },

    #[error("closed form not applicable: {0}")]
    RegimeViolation(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Wrapper so a list of violations can live inside an error message.
#[derive(Debug, Clone, PartialEq)]
pub struct Violations(pub Vec<crate::model::AssumptionViolation>);

impl fmt::Display for Violations {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}
