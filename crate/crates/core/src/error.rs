use thiserror::Error;

/// Errors raised by model evaluation, quadrature and the integrators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("tabulated distribution queried at E = {energy} outside grid [{lo}, {hi}]")]
    Extrapolation { energy: f64, lo: f64, hi: f64 },

    #[error("quadrature did not reach relative tolerance {tol:e} (estimate {estimate:e})")]
    Quadrature { tol: f64, estimate: f64 },

    #[error("derivative of g_m for m = {m} needs a Hoelder index above {required}, model declares {declared:?}")]
    MissingHolder {
        m: f64,
        required: f64,
        declared: Option<f64>,
    },

    #[error("polytropic index undefined at omega = {omega:e}: {reason}")]
    UndefinedIndex { omega: f64, reason: String },

    #[error("step size underflow at t = {t}")]
    StepUnderflow { t: f64 },

    #[error("integration exceeded {0} steps")]
    TooManySteps(usize),

    #[error("non-finite state at t = {t}")]
    NonFinite { t: f64 },

    #[error("state is on the boundary of the unit cube and cannot be inverted")]
    BoundaryState,

    #[error("root finding failed: {0}")]
    Root(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

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
