use thiserror::Error;

/// Library error type. Every failure mode maps onto one of the CLI exit classes
/// through [`Error::exit_code`].
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("level index {index} out of range for a {levels}-level qudit")]
    LevelIndex { index: usize, levels: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("truncation too small: {0}")]
    Truncation(String),
    #[error("levels {j} and {k} are resonant with the readout resonator (denominator {denominator:e})")]
    Resonance { j: usize, k: usize, denominator: f64 },
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("unsupported: {0}")]
    Unsupported(String),
    #[error("numerical abort: {0}")]
    Numerical(String),
    #[error("estimated cost {estimated:e} exceeds budget {budget:e}")]
    Budget { estimated: f64, budget: f64 },
    #[error("config error at `{path}`: {message}")]
    Config { path: String, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }

    /// Process exit code: 2 for configuration and input errors, 3 numerical abort, 4 budget, 1 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config { .. } => 2,
            Error::Numerical(_) => 3,
            Error::Budget { .. } => 4,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}
