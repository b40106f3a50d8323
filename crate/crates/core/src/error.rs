use alloc::boxed::Box;

use crate::flow::FlowResult;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(&'static str),
    #[error("field has {got} values but the grid has {expected} cells")]
    FieldLength { expected: usize, got: usize },
    #[error("field contains a non-finite value at index {0}")]
    NonFinite(usize),
    #[error("fields live on different grids")]
    GridMismatch,
    #[error("invalid coefficient: {0}")]
    InvalidCoefficient(&'static str),
    #[error("invalid parameter: {0}")]
    InvalidParameter(&'static str),
    #[error("ε = 0 is singular here; use the ε-continuation flow or sgn_residual")]
    SingularEpsilon,
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e}, target {target:e})")]
    NotConverged {
        iterations: usize,
        residual: f64,
        target: f64,
    },
    #[error("line search failed at Newton iteration {iteration} (residual {residual:e})")]
    LineSearchFailed { iteration: usize, residual: f64 },
    #[error("forcing has no samples")]
    EmptyForcing,
    #[error("time {0} lies outside the trajectory")]
    TimeOutOfRange(f64),
    #[error("time step {step} failed: {source}")]
    StepFailed {
        step: usize,
        partial: Box<FlowResult>,
        #[source]
        source: Box<Error>,
    },
    #[error("ε schedule exhausted at ε = {last_eps:e} with trajectory gap {achieved_gap:e} (limit {limit:e})")]
    ScheduleExhausted {
        achieved_gap: f64,
        last_eps: f64,
        limit: f64,
    },
}
