use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("Fock truncation for the {mode} mode must be at least 2, got {dim}")]
    InvalidDimension { mode: &'static str, dim: usize },

    #[error("invalid value for `{name}`: {reason}")]
    InvalidArgument { name: &'static str, reason: String },

    #[error("operator dimension {found} does not match the space dimension {expected}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error(
        "near-resonant denominator for states (m, n, l) = ({m}, {n}, {l}): |denominator| = {value:e}"
    )]
    Resonance {
        m: usize,
        n: usize,
        l: usize,
        value: f64,
    },

    #[error("integration failed at t = {time:e} s: {reason}")]
    IntegrationFailure { time: f64, reason: String },

    #[error("trace drifted by {drift:e} at t = {time:e} s")]
    TraceDrift { time: f64, drift: f64 },

    #[error("steady state is not unique: {0}")]
    NonUniqueSteadyState(String),
}

impl Error {
    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidArgument {
            name,
            reason: reason.into(),
        }
    }
}
