use std::path::PathBuf;

use moldline_nn::NnError;
use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("missing file: {}", path.display())]
    MissingFile { path: PathBuf },

    #[error("malformed record {cycle_id}: {reason}")]
    MalformedRecord { cycle_id: String, reason: String },

    #[error("channel mismatch in {cycle_id}: {reason}")]
    ChannelMismatch { cycle_id: String, reason: String },

    #[error("bad split size: {n_test} test rows out of {total}")]
    BadSplitSize { n_test: usize, total: usize },

    #[error("empty trace")]
    EmptyTrace,

    #[error("degenerate constant input (zero standard deviation)")]
    DegenerateConstant,

    #[error("standard deviation is zero")]
    ZeroStd,

    #[error("bad dimensions: {0}")]
    BadDims(String),

    #[error("bad wavelet width {0}")]
    BadWidth(f64),

    #[error("signal of {len} samples is shorter than the widest wavelet ({need})")]
    SignalTooShort { len: usize, need: usize },

    #[error("no in-bounds pixel pairs for the requested offsets")]
    NoValidPairs,

    #[error("need at least {need} values, got {got}")]
    TooFewValues { got: usize, need: usize },

    #[error("singular design matrix")]
    SingularDesign,

    #[error("model used before fit")]
    NotFitted,

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid configuration: {0}")]
    BadConfig(String),

    #[error("unknown model kind {kind:?}; valid kinds: {}", valid.join(", "))]
    UnknownModel { kind: String, valid: Vec<String> },

    #[error("leakage detected: {0}")]
    Leakage(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Nn(#[from] NnError),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::MissingFile { path }
        } else {
            Error::Io { path, source }
        }
    }

    /// Short machine-readable tag, used by the CLI's JSON error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::MissingFile { .. } => "MissingFile",
            Error::MalformedRecord { .. } => "MalformedRecord",
            Error::ChannelMismatch { .. } => "ChannelMismatch",
            Error::BadSplitSize { .. } => "BadSplitSize",
            Error::EmptyTrace => "EmptyTrace",
            Error::DegenerateConstant => "DegenerateConstant",
            Error::ZeroStd => "ZeroStd",
            Error::BadDims(_) => "BadDims",
            Error::BadWidth(_) => "BadWidth",
            Error::SignalTooShort { .. } => "SignalTooShort",
            Error::NoValidPairs => "NoValidPairs",
            Error::TooFewValues { .. } => "TooFewValues",
            Error::SingularDesign => "SingularDesign",
            Error::NotFitted => "NotFitted",
            Error::Shape(_) => "ShapeMismatch",
            Error::BadConfig(_) => "BadConfig",
            Error::UnknownModel { .. } => "UnknownModel",
            Error::Leakage(_) => "Leakage",
            Error::Io { .. } => "Io",
            Error::Json(_) => "Json",
            Error::Csv(_) => "Csv",
            Error::Nn(NnError::ShapeMismatch(_)) => "ShapeMismatch",
            Error::Nn(NnError::NonFiniteLoss { .. }) => "NonFiniteLoss",
            Error::Nn(NnError::InvalidConfig(_)) => "BadConfig",
        }
    }
}
