//! Dataset generators and symbolic oracles for the two benchmark tasks:
//! digit copying with n-in-n withholding, and a miniature robot-command
//! language with a compositional interpreter.

pub mod copy;
pub mod dataset;
pub mod robo;
pub mod vocab;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("expected a sequence of length {expected}, got {got}")]
    WrongLength { expected: usize, got: usize },

    #[error("digit {0} outside the alphabet of size {1}")]
    DigitOutOfRange(u8, usize),

    #[error("alphabet size {0} unsupported (need 6..=10 so all five positions can trigger)")]
    BadAlphabet(usize),

    #[error("train size {requested} exceeds the {available} available sequences")]
    TrainSizeTooLarge { requested: usize, available: usize },

    #[error("unknown token '{0}'")]
    UnknownToken(String),

    #[error("token id {0} out of range for vocabulary of size {1}")]
    TokenIdOutOfRange(usize, usize),

    #[error("cannot parse command: {0}")]
    Parse(String),

    #[error("{path}: line {line}: {msg}")]
    Format {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, TaskError>;
