use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("point outside chart domain: {0}")]
    Domain(String),
    #[error("invalid model: {0}")]
    Model(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("spectral parameter: {0}")]
    Spectral(String),
    #[error("resolution: {0}")]
    Resolution(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-separable model: {0}")]
    NonSeparable(String),
    #[error("ill-conditioned closure: {0}")]
    Closure(String),
    #[error("singular system: {0}")]
    Singular(String),
    #[error("branch violation: {0}")]
    Branch(String),
    #[error("refused: {0}")]
    Refused(String),
    #[error("not converged: {0}")]
    NotConverged(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Process exit code used by the command-line runner.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Model(_) | Error::Config(_) | Error::Shape(_) | Error::Parse(_) => 2,
            Error::Spectral(_) | Error::NonSeparable(_) | Error::Domain(_) => 2,
            Error::Io(_) => 4,
            _ => 3,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        if e.is_io() {
            Error::Io(std::io::Error::other(e.to_string()))
        } else {
            Error::Parse(e.to_string())
        }
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Parse(e.to_string())
    }
}
