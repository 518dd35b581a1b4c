use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid work-zone spec: {0}")]
    InvalidSpec(String),

    #[error("invalid parameter: {0}")]
    InvalidParam(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config error: {0}")]
    Config(String),

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("singular covariance (det = {det:e})")]
    SingularCovariance { det: f64 },

    #[error("empty data")]
    EmptyData,

    #[error("degenerate data: {distinct} distinct points for {k} components")]
    DegenerateData { distinct: usize, k: usize },

    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    #[error("predicted grid has no free cells")]
    NoPredictedFree,

    #[error("goal cell is occupied")]
    GoalOccupied,

    #[error("start or goal pose is occupied")]
    StartOrGoalOccupied,

    #[error("no path found after {expansions} expansions")]
    NoPath { expansions: usize },

    #[error("empty path")]
    EmptyPath,

    #[error("empty trace")]
    EmptyTrace,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
