use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{0}: mesh has no faces after cleanup")]
    EmptyMesh(PathBuf),

    #[error("labels: {0}")]
    Labels(String),

    #[error("image {path}: {message}")]
    Image { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// Non-finite values appeared during an optimization or evaluation.
    #[error("numerical abort: {0}")]
    Numerical(String),

    /// The joint loop hit a non-finite loss; carries the ledger up to that step.
    #[error("numerical abort at joint step {step}: {message}")]
    JointAbort {
        step: usize,
        message: String,
        ledger_json: String,
    },

    #[error("{phase}: {source}")]
    Phase {
        phase: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// Wrap the error with the name of the pipeline phase it came from.
    pub fn in_phase(self, phase: &'static str) -> Self {
        Error::Phase {
            phase,
            source: Box::new(self),
        }
    }

    /// Process exit status for this error: 3 for numerical aborts, 2 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical(_) | Error::JointAbort { .. } => 3,
            Error::Phase { source, .. } => source.exit_code(),
            _ => 2,
        }
    }
}
