use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}:{line}: malformed record: {message}")]
    Malformed {
        file: PathBuf,
        line: usize,
        message: String,
    },

    #[error("window {window_id} references unknown trajectory {traj_id}")]
    DanglingTrajectory { window_id: String, traj_id: String },

    #[error("feature dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: String,
        expected: usize,
        got: usize,
    },

    #[error("invalid record: {0}")]
    Invariant(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("descriptor of trajectory {descriptor_traj} offered to window {window_id} of trajectory {window_traj}")]
    ForeignDescriptor {
        window_id: String,
        window_traj: String,
        descriptor_traj: String,
    },

    #[error("window {0} has no physics label")]
    Unlabeled(String),

    #[error("vector is not unit-normalized (norm {norm})")]
    NotNormalized { norm: f64 },

    #[error("empty denominator set for anchor {anchor}")]
    EmptyDenominator { anchor: usize },

    #[error("every anchor skipped the {branch} term")]
    AllAnchorsSkipped { branch: &'static str },

    #[error("training diverged at epoch {epoch}: non-finite loss")]
    Diverged { epoch: usize },

    #[error("metric undefined: {0}")]
    Undefined(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
