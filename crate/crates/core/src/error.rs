use std::path::PathBuf;

use crate::LanguageId;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown phoneme symbol `{symbol}` (nearest inventory entries: {})", nearest.join(", "))]
    UnknownSymbol { symbol: String, nearest: Vec<String> },

    #[error("g2p failed on token `{token}`: {reason}")]
    G2p { token: String, reason: String },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("shape error: {0}")]
    Shape(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("audio error in {}: {msg}", path.display())]
    Audio { path: PathBuf, msg: String },

    #[error("no valid monotonic alignment: {frames} frames for {units} units")]
    Alignment { frames: usize, units: usize },

    #[error("task sampler for language {0} has no items")]
    EmptyTask(LanguageId),

    #[error("checkpoint write failed at {} and at fallback {}: {msg}", primary.display(), fallback.display())]
    Checkpoint {
        primary: PathBuf,
        fallback: PathBuf,
        msg: String,
    },

    #[error("cosine similarity undefined for a zero-norm embedding")]
    ZeroNorm,

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("tensor error: {0}")]
    Tensor(#[from] candle_core::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("wav error: {0}")]
    Wav(#[from] hound::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Stable identifier of the variant, for machine-readable diagnostics.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Config(_) => "config",
            Error::UnknownSymbol { .. } => "unknown_symbol",
            Error::G2p { .. } => "g2p",
            Error::Parse { .. } => "parse",
            Error::Shape(_) => "shape",
            Error::Contract(_) => "contract",
            Error::Audio { .. } => "audio",
            Error::Alignment { .. } => "alignment",
            Error::EmptyTask(_) => "empty_task",
            Error::Checkpoint { .. } => "checkpoint",
            Error::ZeroNorm => "zero_norm",
            Error::Io(_) => "io",
            Error::Tensor(_) => "tensor",
            Error::Json(_) => "json",
            Error::Wav(_) => "wav",
        }
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }

    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
}
