use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing input file {0}")]
    MissingFile(PathBuf),

    #[error("{file}: parse error at row {row}: {msg}")]
    Parse { file: String, row: usize, msg: String },

    #[error("{file}: format error: {msg}")]
    Format { file: String, msg: String },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid value: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn parse(file: impl Into<String>, row: usize, msg: impl Into<String>) -> Self {
        Error::Parse { file: file.into(), row, msg: msg.into() }
    }

    /// Attach `stage` unless the error already carries one.
    pub fn in_stage(self, stage: Stage) -> Self {
        match self {
            e @ Error::Stage { .. } => e,
            e => Error::Stage { stage, source: Box::new(e) },
        }
    }

    /// Stage that produced this error, if it was raised inside the pipeline.
    pub fn stage(&self) -> Option<Stage> {
        match self {
            Error::Stage { stage, .. } => Some(*stage),
            _ => None,
        }
    }
}

/// Pipeline stages. The discriminant doubles as the process exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Config = 2,
    Ingest = 3,
    Distance = 4,
    Graph = 5,
    Embed = 6,
    Cluster = 7,
    Community = 8,
    Eval = 9,
    Output = 10,
}

impl Stage {
    pub fn exit_code(self) -> i32 {
        self as i32
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Ingest => "ingest",
            Stage::Distance => "distance",
            Stage::Graph => "graph",
            Stage::Embed => "embed",
            Stage::Cluster => "cluster",
            Stage::Community => "community",
            Stage::Eval => "eval",
            Stage::Output => "output",
        };
        f.write_str(s)
    }
}
