use thiserror::Error;

/// Errors raised by the trajectory containers, integrators and the solver stack.
#[derive(Debug, Clone, Error, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("trajectory has no values")]
    EmptyTrajectory,

    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("integrator exhausted its step budget of {max_steps} at t = {t}")]
    StepLimitExceeded { t: f64, max_steps: usize },

    #[error("integrator step size underflow at t = {t}")]
    StepSizeUnderflow { t: f64 },

    #[error("non-finite value encountered in {context} at t = {t}")]
    NonFinite { context: &'static str, t: f64 },

    #[error("matrix `{what}` is rank deficient (rank {rank}, required {required})")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        required: usize,
    },

    #[error("Riccati matrix norm {norm:e} exceeded cap {cap:e} at t = {t}")]
    RiccatiBlowUp { t: f64, norm: f64, cap: f64 },

    #[error("multiplier {value:e} is below the floor {floor:e}")]
    MultiplierBelowFloor { value: f64, floor: f64 },

    #[error("grids are not aligned: {0}")]
    GridMismatch(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}
