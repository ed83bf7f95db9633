use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("argument out of domain: {0}")]
    OutOfDomain(String),

    #[error("nonlinear solve did not converge after {iterations} iterations (residual {residual:e}, dt {dt:e}); halve dt")]
    NonConvergence {
        iterations: usize,
        residual: f64,
        dt: f64,
    },

    #[error("run aborted at t = {t_last:e} (level {level}): time step fell below {dt_min:e}")]
    AbortedRun { level: usize, t_last: f64, dt_min: f64 },

    #[error("could not bracket root: {0}; use a finer time table")]
    UnresolvedRoot(String),

    #[error("implicit step failed to bracket at s = {s:e}; use a finer s grid")]
    StiffStep { s: f64 },

    #[error("energy is flat in s over the fit window; regime too weak to be probative")]
    InsufficientDecay,

    #[error("malformed data: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
