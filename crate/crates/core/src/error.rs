use thiserror::Error;

/// Errors produced anywhere in the simulation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("integrator step size underflow at t = {time:.6e} s (h = {step:.3e} s)")]
    StepUnderflow { time: f64, step: f64 },

    #[error(
        "full amplitude model refused for {n_atoms} atoms (cap {cap}); use the reduced model for large ensembles"
    )]
    OracleCap { n_atoms: usize, cap: usize },

    #[error("gaussian fit did not converge after {iterations} iterations (relative residual {residual:.3e})")]
    FitDivergence { iterations: usize, residual: f64 },

    #[error("angular map has no fitted widths; run the gaussian fit first")]
    Unfitted,

    #[error("pulse shaping denominator {value:.3e} not positive at t = {time:.6e} s")]
    ShapingDenominator { time: f64, value: f64 },

    #[error("target envelope is identically zero on its grid")]
    EmptyEnvelope,

    #[error("config error: {0}")]
    Config(String),

    #[error("{path}: {message}")]
    Parse { path: String, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
