use std::path::PathBuf;

use crate::model::Tier;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A value violated a type invariant at construction time.
    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("malformed TextGrid at line {line}: {message}")]
    MalformedTextGrid { line: usize, message: String },

    #[error("unsupported encoding: {0}")]
    UnsupportedEncoding(String),

    #[error("missing tier {0:?}")]
    MissingTier(String),

    #[error("malformed JSON: {0}")]
    MalformedJson(String),

    #[error("schema violation: {0}")]
    SchemaViolation(String),

    #[error("{context}: dimension mismatch (expected {expected}, found {found})")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("code {code} out of range for {tier} codebook with k = {k}")]
    CodeOutOfRange { tier: Tier, code: u32, k: usize },

    #[error("model mismatch: {0}")]
    ModelMismatch(String),

    #[error("too few points{}: {points} available, k = {k}", tier.map(|t| format!(" at tier {t}")).unwrap_or_default())]
    TooFewPoints {
        tier: Option<Tier>,
        points: usize,
        k: usize,
    },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("bad magic: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("unsupported format version {0}")]
    VersionUnsupported(u16),

    #[error("checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    ChecksumMismatch { stored: u32, computed: u32 },

    #[error("truncated file: need {needed} bytes, have {available}")]
    TruncatedFile { needed: usize, available: usize },

    #[error("split {0:?} has no entries")]
    EmptySplit(String),

    #[error("feature dimension differs across corpus: {first} vs {other} in {utterance}")]
    DimMismatchAcrossCorpus {
        first: usize,
        other: usize,
        utterance: String,
    },

    #[error("alignment covers {expected_frames:.2} frames but features have {num_frames}")]
    AlignmentLengthMismatch {
        num_frames: usize,
        expected_frames: f64,
    },

    #[error("duration must be positive")]
    ZeroDuration,

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },

    #[error("{0}")]
    Config(String),

    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
