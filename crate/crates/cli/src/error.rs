use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad arguments or unknown keys; exit code 2.
    #[error("usage: {0}")]
    Usage(String),

    /// The computation itself failed; exit code 1.
    #[error("{0}")]
    Numerical(String),

    #[error("cannot write {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

impl From<redlab::Error> for CliError {
    fn from(e: redlab::Error) -> Self {
        CliError::Numerical(e.to_string())
    }
}

impl From<redlab_sim::SimError> for CliError {
    fn from(e: redlab_sim::SimError) -> Self {
        match e {
            redlab_sim::SimError::Config(_) | redlab_sim::SimError::Scenario { .. } => CliError::Usage(e.to_string()),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
