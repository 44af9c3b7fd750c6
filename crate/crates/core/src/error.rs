use thiserror::Error;

use crate::submodular::ElementId;

/// Errors raised by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("cosine distance is undefined for a zero vector")]
    ZeroVector,

    #[error("element {0} is already in the subset")]
    ElementInSubset(ElementId),

    #[error("element {element} is out of range for a ground set of size {size}")]
    ElementOutOfRange { element: ElementId, size: usize },

    #[error("ground set of size {size} exceeds the brute-force limit of {limit}")]
    GroundSetTooLarge { size: usize, limit: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("client {client} uploaded a gradient outside the matroid polytope in round {round}")]
    InvalidGradient { client: usize, round: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("config parse error at line {line}, column {column}: {message}")]
    ConfigParse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("feature file: {0}")]
    Features(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::ConfigParse {
            line: e.line(),
            column: e.column(),
            message: {
                // drop serde_json's own location suffix; the variant carries it
                let text = e.to_string();
                match text.rfind(" at line ") {
                    Some(i) => text[..i].to_string(),
                    None => text,
                }
            },
        }
    }
}
