use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("cannot select {requested} arms out of {available}")]
    TooManySlots { requested: usize, available: usize },

    #[error("cannot sample {requested} users out of {available}")]
    TooManyUsers { requested: usize, available: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid carousel: {0}")]
    InvalidCarousel(String),

    #[error("probability {0} is outside the open interval (0, 1)")]
    InvalidProbability(f64),

    #[error("unknown policy id `{0}`")]
    UnknownPolicy(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
