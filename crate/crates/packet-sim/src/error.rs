use thiserror::Error;

pub type Result<T, E = SimError> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("scenario line {line}: {message}")]
    Scenario { line: usize, message: String },

    #[error("event queue exceeded {limit} pending events")]
    EventOverflow { limit: usize },

    #[error("{} sized flow(s) did not complete: {stragglers:?}", stragglers.len())]
    Incomplete { stragglers: Vec<usize> },

    #[error("no sized flows to average over")]
    NoSizedFlows,

    #[error("i/o error writing {path}: {message}")]
    Io { path: String, message: String },
}

impl From<redlab::Error> for SimError {
    fn from(e: redlab::Error) -> Self {
        SimError::Config(e.to_string())
    }
}
