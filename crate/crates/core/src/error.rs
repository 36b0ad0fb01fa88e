use thiserror::Error;

/// Errors raised by the library and mapped to exit codes by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error at row {row}, column {column}: {message}")]
    Parse { row: usize, column: usize, message: String },

    #[error("domain error at curve {t}, point {j}: {message}")]
    Domain { t: usize, j: usize, message: String },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Whether the error stems from the input data rather than from the caller's arguments.
    pub fn is_data_error(&self) -> bool {
        matches!(self, Error::Parse { .. } | Error::Domain { .. } | Error::Io(_))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
