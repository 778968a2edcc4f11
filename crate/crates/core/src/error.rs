use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape error: {0}")]
    Shape(String),

    #[error("invalid config: {0}")]
    Config(String),

    #[error("CTC target infeasible: {label_len} labels with {repeats} adjacent repeats need at least {required} timesteps, got {available}")]
    CtcInfeasible {
        label_len: usize,
        repeats: usize,
        required: usize,
        available: usize,
    },

    #[error("label index {index} out of range for {classes} classes")]
    LabelRange { index: usize, classes: usize },

    #[error("sample {sample}: {source}")]
    Sample {
        sample: String,
        #[source]
        source: Box<Error>,
    },

    #[error("non-finite gradient in tensor `{0}`")]
    Divergence(String),

    #[error("invalid freeze spec `{spec}`: {reason}")]
    FreezeSpec { spec: String, reason: String },

    #[error("nothing to train: freeze spec leaves no trainable layer")]
    NothingTrainable,

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("checkpoint version {found} not supported (expected {expected})")]
    CheckpointVersion { found: u32, expected: u32 },

    #[error("checkpoint checksum mismatch")]
    Checksum,

    #[error("{path}:{line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("character {ch:?} of sample {sample} is not in the alphabet")]
    Encode { sample: String, ch: char },

    #[error("unknown characters in data: {0:?}")]
    UnknownChars(Vec<char>),

    #[error("image error: {0}")]
    Image(String),

    #[error("{0}")]
    Invalid(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Stable machine-readable code for the error class.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Shape(_) => "E_SHAPE",
            Error::Config(_) => "E_CONFIG",
            Error::CtcInfeasible { .. } => "E_CTC_INFEASIBLE",
            Error::LabelRange { .. } => "E_LABEL_RANGE",
            Error::Sample { source, .. } => source.code(),
            Error::Divergence(_) => "E_DIVERGENCE",
            Error::FreezeSpec { .. } => "E_FREEZE_SPEC",
            Error::NothingTrainable => "E_NOTHING_TRAINABLE",
            Error::CorruptCheckpoint(_) => "E_CHECKPOINT_CORRUPT",
            Error::CheckpointVersion { .. } => "E_CHECKPOINT_VERSION",
            Error::Checksum => "E_CHECKPOINT_CHECKSUM",
            Error::Manifest { .. } => "E_MANIFEST",
            Error::Encode { .. } => "E_ENCODE",
            Error::UnknownChars(_) => "E_UNKNOWN_CHARS",
            Error::Image(_) => "E_IMAGE",
            Error::Invalid(_) => "E_INVALID",
            Error::Io { .. } => "E_IO",
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_sample(self, sample: impl Into<String>) -> Self {
        Error::Sample {
            sample: sample.into(),
            source: Box::new(self),
        }
    }
}
