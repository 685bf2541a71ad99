use std::path::PathBuf;

use thiserror::Error;

use crate::query::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("unknown attribute `{0}`")]
    UnknownAttribute(String),
    #[error("unknown structural attribute `{0}`")]
    UnknownStructure(String),
    #[error("unknown dynamic attribute `{0}`")]
    UnknownDynamic(String),
    #[error("position {pos} out of range (corpus size {size})")]
    PositionOutOfRange { pos: usize, size: usize },
    #[error("value id {id} out of range for attribute `{attr}` (lexicon size {len})")]
    IdOutOfRange { attr: String, id: u32, len: usize },
    #[error("no bigram table for attribute `{attr}` with window {window}")]
    NoBigramTable { attr: String, window: u32 },
    #[error("corpus `{0}` is not aligned")]
    NotAligned(String),
    #[error("dynamic attribute `{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch { name: String, expected: usize, got: usize },
    #[error("type error: {0}")]
    Type(String),
    #[error("dynamic attribute `{name}` failed for arguments {args:?}: {reason}")]
    DynamicFailed { name: String, args: Vec<String>, reason: String },
    #[error("invalid regular expression {pattern:?}: {reason}")]
    InvalidRegex { pattern: String, reason: String },
    #[error("invalid corpus: {0}")]
    InvalidCorpus(String),

    #[error("line {line}: expected {expected} column(s), found {found}")]
    RaggedLine { line: usize, expected: usize, found: usize },
    #[error("line {line}: {message}")]
    BadMarkup { line: usize, message: String },
    #[error("input is not valid UTF-8")]
    InvalidUtf8,
    #[error("column has {got} values but corpus has {expected} positions")]
    LengthMismatch { expected: usize, got: usize },
    #[error("attribute `{0}` already exists")]
    AttributeExists(String),
    #[error("bigram window must be at least 1")]
    BadWindow,

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
    #[error("missing corpus file {0}")]
    MissingFile(PathBuf),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("registry line {line}: {message}")]
    Registry { line: usize, message: String },
    #[error("corpus `{id}` not found in registry path [{}]", searched.iter().map(|p| p.display().to_string()).collect::<Vec<_>>().join(", "))]
    CorpusNotFound { id: String, searched: Vec<PathBuf> },

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("corpus mismatch: expected `{expected}`, found `{found}`")]
    CorpusMismatch { expected: String, found: String },
    #[error("malformed result file: {0}")]
    ResultFormat(String),
    #[error("line index {index} out of range ({len} lines)")]
    LineIndex { index: usize, len: usize },

    #[error("remote {addr} unreachable: {reason}")]
    RemoteUnreachable { addr: String, reason: String },
    #[error("remote {addr}: {message}")]
    Remote { addr: String, message: String },
    #[error("authorization failed at {0}")]
    AuthFailed(String),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// Short machine-readable category, used by the HTTP API.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::UnknownAttribute(_) => "unknown-attribute",
            Error::UnknownStructure(_) => "unknown-structure",
            Error::UnknownDynamic(_) => "unknown-dynamic",
            Error::PositionOutOfRange { .. } => "position-out-of-range",
            Error::IdOutOfRange { .. } => "id-out-of-range",
            Error::NoBigramTable { .. } => "no-bigram-table",
            Error::NotAligned(_) => "not-aligned",
            Error::ArityMismatch { .. } => "arity-mismatch",
            Error::Type(_) => "type-error",
            Error::DynamicFailed { .. } => "dynamic-failed",
            Error::InvalidRegex { .. } => "invalid-regex",
            Error::InvalidCorpus(_) => "invalid-corpus",
            Error::RaggedLine { .. } => "ragged-line",
            Error::BadMarkup { .. } => "bad-markup",
            Error::InvalidUtf8 => "invalid-utf8",
            Error::LengthMismatch { .. } => "length-mismatch",
            Error::AttributeExists(_) => "attribute-exists",
            Error::BadWindow => "bad-window",
            Error::Format { .. } => "format",
            Error::MissingFile(_) => "missing-file",
            Error::Io { .. } => "io",
            Error::Registry { .. } => "registry",
            Error::CorpusNotFound { .. } => "not-found",
            Error::Parse(_) => "syntax",
            Error::CorpusMismatch { .. } => "corpus-mismatch",
            Error::ResultFormat(_) => "result-format",
            Error::LineIndex { .. } => "line-index",
            Error::RemoteUnreachable { .. } => "remote-unreachable",
            Error::Remote { .. } => "remote",
            Error::AuthFailed(_) => "auth-failed",
        }
    }
}
