use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A solve or factorization did not meet its accuracy target.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// A run, sweep or environment configuration is invalid.
    #[error("config error: {0}")]
    Config(String),

    /// Two independent oracle routes disagree beyond tolerance.
    #[error("oracle diagnostics: {0}")]
    Diagnostics(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::Diagnostics(_) => 3,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
