use std::path::PathBuf;

use thiserror::Error;

use crate::corpus::TokenId;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failures from a translator backend.
#[derive(Debug, Error)]
pub enum TranslateError {
    /// The backend could not be reached or asked us to back off.
    #[error("transport error: {message}")]
    Transport { message: String, retryable: bool },
    /// The backend answered, but not according to the wire protocol.
    #[error("protocol error: {0}")]
    Protocol(String),
    /// The backend refused the request (HTTP 4xx).
    #[error("request rejected with status {status}: {message}")]
    Rejected { status: u16, message: String },
    #[error("invalid translator input: {0}")]
    InvalidInput(String),
    #[error("vocabulary unavailable: {0}")]
    VocabUnavailable(String),
}

impl TranslateError {
    pub fn is_retryable(&self) -> bool {
        matches!(self, TranslateError::Transport { retryable: true, .. })
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("line count mismatch: {source_lines} source lines vs {target_lines} target lines")]
    LineCountMismatch {
        source_lines: usize,
        target_lines: usize,
    },
    #[error("invalid vocabulary: {0}")]
    Vocab(String),
    #[error("invalid corpus: {0}")]
    Corpus(String),
    #[error("only {eligible} eligible pivot tokens, {requested} requested")]
    InsufficientPivots { eligible: usize, requested: usize },
    #[error("pivot {pivot} has {available} single-occurrence sentences, {requested} requested")]
    InsufficientSentences {
        pivot: TokenId,
        available: usize,
        requested: usize,
    },
    #[error("invalid synthetic spec: {0}")]
    SynthSpec(String),
    #[error("subgroups mix pivots {expected} and {found}")]
    PivotMismatch { expected: TokenId, found: TokenId },
    #[error("need at least {keep} subgroups, ensemble has {available}")]
    TooFewSubgroups { keep: usize, available: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("cache: {0}")]
    Cache(String),
    #[error("resume refused: {0}")]
    ResumeRefused(String),
    #[error("stale input: {0}")]
    DigestMismatch(String),
    #[error(transparent)]
    Translate(#[from] TranslateError),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Stable machine-readable error code.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { .. } => "io",
            Error::Parse { .. } => "parse",
            Error::LineCountMismatch { .. } => "line_count_mismatch",
            Error::Vocab(_) => "vocab",
            Error::Corpus(_) => "corpus",
            Error::InsufficientPivots { .. } => "insufficient_pivots",
            Error::InsufficientSentences { .. } => "insufficient_sentences",
            Error::SynthSpec(_) => "synth_spec",
            Error::PivotMismatch { .. } => "pivot_mismatch",
            Error::TooFewSubgroups { .. } => "too_few_subgroups",
            Error::InvalidArgument(_) => "invalid_argument",
            Error::Cache(_) => "cache",
            Error::ResumeRefused(_) => "resume_refused",
            Error::DigestMismatch(_) => "digest_mismatch",
            Error::Translate(TranslateError::Transport { .. }) => "transport",
            Error::Translate(TranslateError::Protocol(_)) => "protocol",
            Error::Translate(TranslateError::Rejected { .. }) => "rejected",
            Error::Translate(TranslateError::InvalidInput(_)) => "invalid_input",
            Error::Translate(TranslateError::VocabUnavailable(_)) => "vocab_unavailable",
            Error::Json(_) => "json",
        }
    }
}
