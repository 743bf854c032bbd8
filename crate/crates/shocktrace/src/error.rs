use thiserror::Error;

/// Crate-wide error type.  The CLI maps variants onto exit codes:
/// config errors -> 2, certificate failures -> 3, numeric aborts -> 4.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),

    #[error("model: {0}")]
    Model(String),

    #[error("preprocess: {0}")]
    Preprocess(String),

    #[error("solver: {0}")]
    Solver(String),

    #[error("shock tracking: {0}")]
    Shocks(String),

    #[error("certificate failure: {0}")]
    Certificate(String),

    #[error("numeric abort: {0}")]
    Numeric(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Certificate(_) => 3,
            Error::Numeric(_) | Error::Solver(_) | Error::Shocks(_) => 4,
            _ => 4,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
