use thiserror::Error;

/// Library-wide error type. Variants map onto CLI exit codes via [`Error::exit_code`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("singular argument: {0}")]
    Singularity(String),
    #[error("invalid input: {0}")]
    Input(String),
    #[error("unsupported regime: {0}")]
    UnsupportedRegime(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    /// 2 for bad input / domain / regime, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Domain(_)
            | Error::Singularity(_)
            | Error::Input(_)
            | Error::UnsupportedRegime(_) => 2,
            Error::Numerical(_) | Error::Invariant(_) | Error::Io(_) => 3,
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

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
