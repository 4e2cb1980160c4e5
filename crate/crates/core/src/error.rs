use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Errors surfaced by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input too short: {len} samples, need at least {needed}")]
    InputTooShort { len: usize, needed: usize },

    #[error("COLA violation: window sum {sum:.3e} at sample {index}")]
    ColaViolation { index: usize, sum: f64 },

    #[error("zero-power operand: {0}")]
    ZeroPower(&'static str),

    #[error("unsupported sample rate {0} Hz (only 16000 is supported)")]
    SampleRate(u32),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("undefined reference: clean signal has zero energy")]
    UndefinedReference,

    #[error("layout mismatch: {0}")]
    Layout(String),

    #[error("empty dataset")]
    EmptyDataset,

    #[error("empty path: finalize called before any optimizer step")]
    EmptyPath,

    #[error("importance state required for task {0}")]
    MissingState(usize),

    #[error("incomplete evaluation matrix: missing ({model}, {testset})")]
    IncompleteMatrix { model: String, testset: String },

    #[error("gradient check failed: max relative error {max_rel_err:.3e} > tolerance {tol:.3e}")]
    GradientCheck { max_rel_err: f64, tol: f64 },

    #[error("wav: malformed header{}", .0.as_ref().map(|s| format!(" ({s})")).unwrap_or_default())]
    WavMalformed(Option<String>),

    #[error("wav: expected mono, found {0} channels")]
    WavNotMono(u16),

    #[error("wav: expected 16-bit PCM, found {0}")]
    WavNotPcm16(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("missing file {}", .0.display())]
    MissingFile(PathBuf),

    #[error("manifest: {0}")]
    Manifest(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    /// Stable identifier of the variant, for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Self::InputTooShort { .. } => "input_too_short",
            Self::ColaViolation { .. } => "cola_violation",
            Self::ZeroPower(_) => "zero_power",
            Self::SampleRate(_) => "sample_rate",
            Self::Config(_) => "config",
            Self::Shape(_) => "shape",
            Self::NonFinite(_) => "non_finite",
            Self::UndefinedReference => "undefined_reference",
            Self::Layout(_) => "layout",
            Self::EmptyDataset => "empty_dataset",
            Self::EmptyPath => "empty_path",
            Self::MissingState(_) => "missing_state",
            Self::IncompleteMatrix { .. } => "incomplete_matrix",
            Self::GradientCheck { .. } => "gradient_check",
            Self::WavMalformed(_) => "wav_malformed",
            Self::WavNotMono(_) => "wav_not_mono",
            Self::WavNotPcm16(_) => "wav_not_pcm16",
            Self::Checkpoint(_) => "checkpoint",
            Self::MissingFile(_) => "missing_file",
            Self::Manifest(_) => "manifest",
            Self::Json(_) => "json",
            Self::Io(_) => "io",
        }
    }

    /// True for errors caused by invalid user input rather than by a
    /// failure while running.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Self::Config(_)
                | Self::SampleRate(_)
                | Self::MissingState(_)
                | Self::WavMalformed(_)
                | Self::WavNotMono(_)
                | Self::WavNotPcm16(_)
                | Self::Checkpoint(_)
                | Self::MissingFile(_)
                | Self::Manifest(_)
                | Self::Json(_)
        )
    }
}
