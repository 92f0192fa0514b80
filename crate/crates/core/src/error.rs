use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Every error names the module and operation it came from plus the
/// offending input, so a failed pipeline run is diagnosable from the
/// message alone.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{context}: {path}: {source}")]
    Io {
        context: &'static str,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus::load_corpus: line {line}: malformed record: {reason}")]
    MalformedRecord { line: usize, reason: String },

    #[error("corpus::load_corpus: line {line}: record {id:?} has unparseable date {value:?}")]
    RecordDate {
        line: usize,
        id: String,
        value: String,
    },

    #[error("corpus::load_schedule: line {line}: {reason}")]
    Schedule { line: usize, reason: String },

    #[error("corpus::chunk_by_schedule: {0}")]
    InvalidSchedule(String),

    #[error("corpus::chunk_by_schedule: documents outside schedule: {}", ids.join(", "))]
    OutsideSchedule { ids: Vec<String> },

    #[error("ingest::parse_protocol_xml: malformed XML at byte {offset}: {reason}")]
    Xml { offset: u64, reason: String },

    #[error("ingest::parse_protocol_xml: schema error: {0}")]
    Schema(String),

    #[error("ingest::ingest_files: {path}: {source}")]
    Protocol {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error("ingest::load_ruleset: line {line}: invalid pattern {pattern:?}: {reason}")]
    Ruleset {
        line: usize,
        pattern: String,
        reason: String,
    },

    #[error("ingest::split_speeches: ruleset has no speaker-header pattern")]
    EmptyRuleset,

    #[error("lda::{op}: word id {word} out of range for vocabulary of size {vocab_size}")]
    WordOutOfRange {
        op: &'static str,
        word: u32,
        vocab_size: usize,
    },

    #[error("{op}: invalid parameter: {reason}")]
    InvalidParams { op: &'static str, reason: String },

    #[error("rolling::init: initialization corpus contains no modelable tokens")]
    EmptyInit,

    #[error("rolling::advance: expected chunk index {expected}, got {got}")]
    NonConsecutiveChunk { expected: usize, got: usize },

    #[error("{op}: chunk {t} not available (modeled range {first}..={last})")]
    ChunkOutOfRange {
        op: &'static str,
        t: usize,
        first: usize,
        last: usize,
    },

    #[error("detect::{op}: similarity undefined for a zero vector")]
    ZeroVector { op: &'static str },

    #[error("detect::{op}: length mismatch ({left} vs {right})")]
    LengthMismatch {
        op: &'static str,
        left: usize,
        right: usize,
    },

    #[error("detect::reference_counts: run length {z} exceeds chunk index {t}")]
    RunLength { z: usize, t: usize },

    #[error("detect::threshold: empty similarity set")]
    EmptySimilarities,

    #[error("impact::impact_report: topic {topic} at chunk {t} is not a detected change")]
    NotDetected { topic: usize, t: usize },

    #[error("checkpoint: line {line}: {reason}")]
    Checkpoint { line: usize, reason: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(
        context: &'static str,
        path: impl Into<PathBuf>,
        source: std::io::Error,
    ) -> Self {
        Error::Io {
            context,
            path: path.into(),
            source,
        }
    }

    pub(crate) fn params(op: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParams {
            op,
            reason: reason.into(),
        }
    }
}
