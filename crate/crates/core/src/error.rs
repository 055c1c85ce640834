use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("format error: {0}")]
    Format(String),

    #[error("no floor-labeled points and no floor height override")]
    MissingFloor,

    #[error("point cloud is empty")]
    EmptyCloud,

    #[error("point {0:?} lies outside the grid")]
    OutOfBounds([f64; 3]),

    #[error("scene projection has no occupied cell")]
    EmptyScene,

    #[error("visibility seed cell {0:?} is occupied; was the target erased?")]
    CenterOccupied([usize; 3]),

    #[error("path enumeration too large: local offset sum {0} exceeds {1}")]
    TooLarge(usize, usize),

    #[error("target lies directly above or below the shoulder; azimuth undefined")]
    DegeneratePointing,

    #[error("avatar library is empty")]
    EmptyLibrary,

    #[error("no feasible placement for target {0}")]
    NoPlacement(i32),

    #[error("zero-length ray in pointing score")]
    DegenerateRay,

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty input")]
    EmptyInput,

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
