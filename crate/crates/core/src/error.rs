use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("degenerate rotation: implied columns are parallel or near zero ({0})")]
    DegenerateRotation(String),

    #[error("matrix is not a rotation: {0}")]
    NotARotation(String),

    #[error("invalid skeleton: {0}")]
    InvalidSkeleton(String),

    #[error("length mismatch in {what}: expected {expected}, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("sequence too short for {what}: need at least {needed} frames, got {got}")]
    TooShort {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("malformed header in {path}: {reason}")]
    MalformedHeader { path: PathBuf, reason: String },

    #[error("channel spans overlap or leave gaps: {0}")]
    SpanOverlap(String),

    #[error("payload of {path} has {got} values, header implies {expected}")]
    FrameLengthMismatch {
        path: PathBuf,
        expected: usize,
        got: usize,
    },

    #[error("missing channel `{0}`")]
    MissingChannel(String),

    #[error("diffusion step {t} out of range [{lo}, {hi}]")]
    StepOutOfRange { t: usize, lo: usize, hi: usize },

    #[error("unknown {what} `{name}`")]
    Unknown { what: &'static str, name: String },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite loss at step {step} (t={t}): {components}")]
    NonFiniteLoss {
        step: usize,
        t: f64,
        components: String,
    },

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("io error on {path}: {source}")]
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
    Candle(#[from] candle_core::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Self::Io {
            path: path.into(),
            source,
        }
    }
}
