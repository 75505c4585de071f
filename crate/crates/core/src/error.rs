use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// Two inputs that must share a layout do not.
    #[error("size mismatch: {0}")]
    Sizing(String),

    /// An argument lies outside the domain where the operation is defined.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested constraint set is empty.
    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("no convergence after {iterations} iterations (last residual {residual:e})")]
    IterationLimit { iterations: usize, residual: f64 },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// An object is missing data the operation needs.
    #[error("invalid state: {0}")]
    State(String),

    #[error("linear solver failure: {0}")]
    Solver(String),
}
