use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("document is empty after normalization")]
    EmptyDocument,

    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },

    #[error("annotation passage for `{label}` not found in any blob: {passage:?}")]
    OrphanAnnotation { label: String, passage: String },

    #[error("no policy files found in {0}")]
    EmptyCorpus(PathBuf),

    #[error("failed to load {file}: {source}")]
    CorpusFile {
        file: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("label schema error: {0}")]
    Schema(String),

    #[error("degenerate training set: {0}")]
    DegenerateTrainingSet(String),

    #[error("shape mismatch: expected {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("model asset unavailable: {0}")]
    ModelAsset(String),

    #[error("training diverged: {0}")]
    TrainingDiverged(String),

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("model is not trained for `{0}`")]
    NotTrained(String),

    #[error("training job {job} for `{label}` failed: {message}")]
    JobFailed { job: u64, label: String, message: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("integrity error in {extractor}: {message}")]
    Integrity { extractor: String, message: String },

    #[error("split error: {0}")]
    Split(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
}
