use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: malformed record: {message}")]
    MalformedRecord {
        path: String,
        line: usize,
        message: String,
    },

    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },

    #[error("mention `{mention_id}`: span out of bounds ({detail})")]
    SpanOutOfBounds { mention_id: String, detail: String },

    #[error("mention `{mention_id}`: text `{found}` does not match covered tokens `{expected}`")]
    TextMismatch {
        mention_id: String,
        expected: String,
        found: String,
    },

    #[error("mention `{mention_id}` refers to unknown document `{doc_id}`")]
    UnknownDocument { mention_id: String, doc_id: String },

    #[error("unknown mention `{0}`")]
    UnknownMention(String),

    #[error("mention `{0}` has no gold cluster label")]
    MissingGoldLabel(String),

    #[error("invalid synthetic spec: {0}")]
    InvalidSpec(String),

    #[error("dimension mismatch in {context}: expected {expected}, got {actual}")]
    DimensionMismatch {
        context: String,
        expected: usize,
        actual: usize,
    },

    #[error("embedding service error: {0}")]
    EmbeddingService(String),

    #[error("generation service error: {0}")]
    GenerationService(String),

    #[error("event `{event}` does not occur in context")]
    EventNotInContext { event: String },

    #[error("few-shot prompting requires {expected} exemplars, got {actual}")]
    ExemplarCount { expected: usize, actual: usize },

    #[error("no inference fixture for mention `{mention_id}` in document `{doc_id}`")]
    MissingFixture { doc_id: String, mention_id: String },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("empty batch")]
    EmptyBatch,

    #[error("empty threshold grid")]
    EmptyGrid,

    #[error("no pairwise score for ({0}, {1})")]
    MissingScore(String, String),

    #[error("clustering does not cover mention `{0}`")]
    UncoveredMention(String),

    #[error("checkpoint: {0}")]
    Checkpoint(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
}
