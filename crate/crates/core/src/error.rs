use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("degenerate geometry: distance row of POI {poi} has zero spread")]
    DegenerateGeometry { poi: usize },

    #[error("corpus is empty{}", .0.as_deref().map(|s| format!(" ({s})")).unwrap_or_default())]
    EmptyCorpus(Option<String>),

    #[error("malformed line {line}: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("trace does not belong to this sample: {0}")]
    TraceMismatch(String),

    #[error("training split contains no samples")]
    EmptyTrainSet,

    #[error("truth POI {truth} is missing from ranking of length {len}")]
    TruthMissing { truth: usize, len: usize },

    #[error("bad file format in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] io::Error),
}

impl Error {
    /// Errors caused by the user's input rather than by the program itself.
    pub fn is_bad_input(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::TraceMismatch(_))
    }
}
