use thiserror::Error;

/// Errors raised by the numerical pipeline.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum QhjError {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("domain truncation: tail mass {tail_mass:e} outside the grid exceeds {limit:e}")]
    DomainTruncation { tail_mass: f64, limit: f64 },

    #[error("non-finite value at t = {time}")]
    NonFinite { time: f64 },

    #[error("shooting did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("caustic at t = {time}: {reason}")]
    Caustic { time: f64, reason: String },

    #[error("degenerate quadratic form: {0}")]
    DegenerateQuadratic(String),

    #[error("unsupported potential: {0}")]
    UnsupportedPotential(String),

    #[error("kernel under-sampled: phase step {phase_step:.3} rad per sample exceeds pi/2")]
    Aliasing { phase_step: f64 },

    #[error("split-step self-convergence failed: step halving changed the state by {change:e}")]
    OracleNotConverged { change: f64 },

    #[error("Poisson bracket violation: {{Q,P}} = {bracket} at ({q}, {p})")]
    PoissonBracket { bracket: f64, q: f64, p: f64 },

    #[error("{0}")]
    Config(String),

    #[error("io: {0}")]
    Io(String),
}

impl QhjError {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        QhjError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for QhjError {
    fn from(e: std::io::Error) -> Self {
        QhjError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, QhjError>;
