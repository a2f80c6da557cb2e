use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("non-finite value: {0}")]
    Numeric(String),

    #[error("verification failed: {0}")]
    Verification(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("representation error: {0}")]
    Representation(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("comparison error: unit sets differ ({0:?})")]
    Comparison(Vec<String>),

    #[error("training diverged at step {step}: validation loss {loss} exceeds 10x initial {initial}")]
    Diverged { step: usize, loss: f64, initial: f64 },

    #[error("checkpoint has bad magic bytes")]
    BadMagic,

    #[error("checkpoint is truncated")]
    Truncated,

    #[error("checkpoint version {found} is not supported (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },

    #[error("vocabulary mismatch: checkpoint {checkpoint} vs corpus {corpus}")]
    VocabularyMismatch { checkpoint: String, corpus: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numeric/training.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 1,
            Error::Io { .. }
            | Error::Data(_)
            | Error::Sampling(_)
            | Error::Lookup(_)
            | Error::Representation(_)
            | Error::Evaluation(_)
            | Error::Comparison(_)
            | Error::BadMagic
            | Error::Truncated
            | Error::VersionMismatch { .. }
            | Error::VocabularyMismatch { .. } => 2,
            Error::Dimension { .. }
            | Error::Numeric(_)
            | Error::Verification(_)
            | Error::Diverged { .. } => 3,
        }
    }
}
