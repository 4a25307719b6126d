use std::io;
use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("frequency table is empty (total count is zero)")]
    EmptyTable,

    #[error("value {0} is outside the domain of the Zipf scale (must be > 0)")]
    Domain(f64),

    #[error("sentence has no tokens after normalization")]
    EmptySentence,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("corpus ingestion aborted after {records} records ({skipped} skipped): {source}")]
    IngestAborted {
        records: u64,
        skipped: u64,
        #[source]
        source: io::Error,
    },

    #[error("no fixture for prompt hash {0}")]
    MissingFixture(String),

    #[error("provider returned an empty completion")]
    EmptyCompletion,

    #[error("provider request rejected with HTTP {status}: {body}")]
    PermanentHttp { status: u16, body: String },

    #[error("provider failed after {attempts} attempts: {last}")]
    RetriesExhausted { attempts: u32, last: String },

    #[error("provider error: {0}")]
    Provider(String),

    #[error("all {0} story completions failed; distilled corpus is empty")]
    EmptyDistillation(usize),

    #[error("candidate {index} could not be scored: {reason}")]
    Unscoreable { index: usize, reason: String },

    #[error("need at least {needed} candidates, got {got}")]
    TooFewCandidates { needed: usize, got: usize },

    #[error("no score for instance {0:?}")]
    MissingScore(String),

    #[error("score for instance {0:?} is NaN")]
    NanScore(String),

    #[error("unknown annotator {0:?}")]
    UnknownAnnotator(String),

    #[error("job {0} not found")]
    JobNotFound(u64),

    #[error("job {0} is already finalized")]
    JobFinalized(u64),

    #[error("journal {path} is corrupt at line {line}: {message}")]
    Journal {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("rank {rank} outside vocabulary 1..={vocab}")]
    RankOutOfRange { rank: usize, vocab: usize },

    #[error("precondition failed: {0}")]
    Precondition(String),

    #[error("could not satisfy the log-domain bound after {0} attempts")]
    BoundUnsatisfiable(u32),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
