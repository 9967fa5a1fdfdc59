use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: cannot decode image: {reason}", path.display())]
    Decode { path: PathBuf, reason: String },

    #[error("{}: no frames found", .0.display())]
    NoFrames(PathBuf),

    #[error("{}: not an 8-bit grayscale image ({found})", path.display())]
    NotGrayscale { path: PathBuf, found: String },

    #[error("dimension mismatch: expected {expected_h}x{expected_w}, got {got_h}x{got_w}")]
    DimensionMismatch {
        expected_h: usize,
        expected_w: usize,
        got_h: usize,
        got_w: usize,
    },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("odd frame dimension {height}x{width}; the Haar transform needs even sizes")]
    OddDimension { height: usize, width: usize },

    #[error("value range violated: {0}")]
    ValueRange(String),

    #[error("out of bounds: {0}")]
    OutOfBounds(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("undersampled pupil: pitch {pitch_m:e} m exceeds twice the recommended {recommended_m:e} m")]
    Undersampled { pitch_m: f64, recommended_m: f64 },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("architecture mismatch: expected {expected}, found {found}")]
    ArchitectureMismatch { expected: String, found: String },

    #[error("non-finite loss at step {step}: {snapshot}")]
    NonFiniteLoss { step: u64, snapshot: String },

    #[error("invalid flow file: {0}")]
    FlowFile(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn dims(expected: (usize, usize), got: (usize, usize)) -> Self {
        Error::DimensionMismatch {
            expected_h: expected.0,
            expected_w: expected.1,
            got_h: got.0,
            got_w: got.1,
        }
    }
}
