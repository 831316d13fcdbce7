use std::path::PathBuf;

/// Errors produced by the toolkit.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("wav error: {0}")]
    Wav(String),
    #[error("unsupported channel count: {0}")]
    UnsupportedChannels(u16),
    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),
    #[error("sample rate mismatch: expected {expected} Hz, got {actual} Hz")]
    SampleRateMismatch { expected: u32, actual: u32 },
    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("duplicate manifest id: {0}")]
    DuplicateId(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("missing labels for utterance {0}")]
    MissingLabels(String),
    #[error("label/frame length mismatch for utterance {id}: {labels} labels vs {frames} frames")]
    LabelMismatch {
        id: String,
        labels: usize,
        frames: usize,
    },
    #[error("label {label} out of range for {num_classes} classes")]
    LabelOutOfRange { label: usize, num_classes: usize },
    #[error("format error: {0}")]
    Format(String),
    #[error("manifests overlap on utterance id {0}")]
    Overlap(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag for the error variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Wav(_) => "wav",
            Error::UnsupportedChannels(_) => "unsupported_channels",
            Error::UnsupportedEncoding(_) => "unsupported_encoding",
            Error::SampleRateMismatch { .. } => "sample_rate_mismatch",
            Error::Parse { .. } => "parse",
            Error::DuplicateId(_) => "duplicate_id",
            Error::Config(_) => "config",
            Error::InvalidInput(_) => "invalid_input",
            Error::Shape(_) => "shape",
            Error::NonFinite(_) => "non_finite",
            Error::MissingLabels(_) => "missing_labels",
            Error::LabelMismatch { .. } => "label_mismatch",
            Error::LabelOutOfRange { .. } => "label_out_of_range",
            Error::Format(_) => "format",
            Error::Overlap(_) => "overlap",
            Error::Json(_) => "json",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
