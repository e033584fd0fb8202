use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at {line}:{column}: {message}")]
    Parse {
        line: u32,
        column: u32,
        message: String,
    },

    #[error("unsupported construct <{element}>: {message}")]
    Unsupported { element: String, message: String },

    #[error("invalid score: {0}")]
    InvalidScore(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("degenerate samples: {0}")]
    DegenerateSamples(String),

    #[error("out-of-order onset: {onset} s after {previous} s")]
    OutOfOrder { onset: f64, previous: f64 },

    #[error("midi: {0}")]
    Midi(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line: line as u32,
            column: 0,
            message: message.into(),
        }
    }

    pub(crate) fn input(message: impl Into<String>) -> Self {
        Error::InvalidInput(message.into())
    }
}
