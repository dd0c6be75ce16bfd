use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("{what} = {value} is outside the domain of the model")]
    Domain { what: &'static str, value: f64 },

    #[error("derivative order {0} is not supported (max 3)")]
    UnsupportedOrder(u8),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("root search did not converge: {0}")]
    Convergence(String),

    #[error("no sign change of the crossing residual on [{lo}, {hi}]")]
    Bracket { lo: f64, hi: f64 },

    #[error("integration produced a non-finite state at t = {time}")]
    Integration { time: f64 },

    #[error("step {step} does not divide the delay {delay} into at least 200 equal parts")]
    InvalidStep { step: f64, delay: f64 },

    #[error("trajectory window too short: need {needed} s after the transient, have {available} s")]
    WindowTooShort { needed: f64, available: f64 },

    #[error("internal consistency check failed: {0}")]
    Inconsistent(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate point: {0}")]
    Degenerate(String),
}
