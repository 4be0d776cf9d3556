//! Crate-wide error type. Variants map one-to-one onto the failure modes of
//! the public operations; the CLI layer decides exit codes from `is_user_error`.

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- audio ingestion ----
    #[error("unreadable audio file {path}: {reason}")]
    UnreadableFile { path: PathBuf, reason: String },
    #[error("unsupported audio format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("sample rate {got} Hz differs from required {want} Hz and resampling is disabled")]
    WrongSampleRate { got: u32, want: u32 },
    #[error("audio too short: {0}")]
    TooShort(String),
    #[error("empty track: {0}")]
    EmptyTrack(String),
    #[error("subject {subject} out of range for {n_subjects} subjects")]
    SubjectOutOfRange { subject: usize, n_subjects: usize },

    // ---- tensor / layer plumbing ----
    #[error("shape mismatch in {op}: expected {expected}, got {got}")]
    ShapeMismatch {
        op: &'static str,
        expected: String,
        got: String,
    },
    #[error("length mismatch in {op}: {left} vs {right}")]
    LengthMismatch {
        op: &'static str,
        left: usize,
        right: usize,
    },
    #[error("non-finite values produced by {0}")]
    NonFinite(String),
    #[error("non-finite gradient in {0}")]
    NonFiniteGradient(String),
    #[error("non-finite loss: {0}")]
    NonFiniteLoss(String),

    // ---- model / task wiring ----
    #[error("task mismatch: expected {expected}, got {got}")]
    TaskMismatch { expected: String, got: String },
    #[error("missing attention mask for task {0}")]
    MissingMask(String),

    // ---- metrics ----
    #[error("degenerate input for {op}: {reason}")]
    DegenerateInput { op: &'static str, reason: String },
    #[error("constant track cannot be normalized")]
    ConstantTrack,
    #[error("empty sample set in {0}")]
    EmptySet(&'static str),

    // ---- dataset / files ----
    #[error("sequence {id} too short: {frames} frames < window {window}")]
    SequenceTooShort {
        id: String,
        frames: usize,
        window: usize,
    },
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("schema violation in {path}: {reason}")]
    SchemaViolation { path: PathBuf, reason: String },
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("duration mismatch: voice {voice_frames} frames vs music {music_frames} frames")]
    DurationMismatch {
        voice_frames: usize,
        music_frames: usize,
    },
    #[error("checkpoint incompatible: {0}")]
    CheckpointIncompatible(String),
    #[error("missing track {name} under {dir}")]
    MissingTrack { name: String, dir: PathBuf },
    #[error("missing generation result under {0}")]
    MissingResult(PathBuf),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// User errors (bad inputs, files, configs) exit with code 1; internal
    /// failures (non-finite math, shape bugs) exit with code 2.
    pub fn is_user_error(&self) -> bool {
        !matches!(
            self,
            Error::ShapeMismatch { .. }
                | Error::LengthMismatch { .. }
                | Error::NonFinite(_)
                | Error::NonFiniteGradient(_)
                | Error::NonFiniteLoss(_)
        )
    }

    /// Short machine-readable kind tag for the CLI error JSON.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnreadableFile { .. } => "unreadable_file",
            Error::UnsupportedFormat { .. } => "unsupported_format",
            Error::WrongSampleRate { .. } => "wrong_sample_rate",
            Error::TooShort(_) => "too_short",
            Error::EmptyTrack(_) => "empty_track",
            Error::SubjectOutOfRange { .. } => "subject_out_of_range",
            Error::ShapeMismatch { .. } => "shape_mismatch",
            Error::LengthMismatch { .. } => "length_mismatch",
            Error::NonFinite(_) => "non_finite",
            Error::NonFiniteGradient(_) => "non_finite_gradient",
            Error::NonFiniteLoss(_) => "non_finite_loss",
            Error::TaskMismatch { .. } => "task_mismatch",
            Error::MissingMask(_) => "missing_mask",
            Error::DegenerateInput { .. } => "degenerate_input",
            Error::ConstantTrack => "constant_track",
            Error::EmptySet(_) => "empty_set",
            Error::SequenceTooShort { .. } => "sequence_too_short",
            Error::MissingFile(_) => "missing_file",
            Error::SchemaViolation { .. } => "schema_violation",
            Error::InvalidConfig(_) => "invalid_config",
            Error::DurationMismatch { .. } => "duration_mismatch",
            Error::CheckpointIncompatible(_) => "checkpoint_incompatible",
            Error::MissingTrack { .. } => "missing_track",
            Error::MissingResult(_) => "missing_result",
            Error::Io { .. } => "io",
        }
    }
}
