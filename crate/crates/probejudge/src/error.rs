use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("no recognized source files under {0}")]
    EmptyCorpus(PathBuf),

    #[error("manifest integrity: origin of entry `{id}` not found at {origin}")]
    ManifestIntegrity { id: String, origin: PathBuf },

    #[error("manifest parse error at line {line}: {message}")]
    ManifestParse { line: usize, message: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("environment error: {0}")]
    Environment(String),

    #[error("judge transport error after {attempts} attempt(s): {message}")]
    Transport { attempts: u32, message: String },

    #[error("judge API error: status {status}: {body_excerpt}")]
    Api { status: u16, body_excerpt: String },

    #[error("prompt contract: {0}")]
    PromptContract(String),

    #[error("record log parse error at line {line}: {message}")]
    RecordLogParse { line: usize, message: String },

    #[error("record log label mismatch: log has {log_labels:?}, config has {config_labels:?}")]
    LabelMismatch {
        log_labels: Vec<String>,
        config_labels: Vec<String>,
    },

    #[error("no verdict recorded for label `{label}` on case `{id}`")]
    MissingVerdict { label: String, id: String },

    #[error("no records to score")]
    EmptyRecords,

    #[error("pipeline aborted after {completed} record(s); partial log kept at {log}; resume with --resume")]
    Aborted {
        completed: usize,
        log: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Input(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code bucket: 1 for environment/config trouble, 2 for bad input.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Environment(_) | Error::Transport { .. } | Error::Api { .. } => 1,
            Error::Aborted { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
