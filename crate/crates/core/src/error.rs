use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("duplicate group_id `{0}`")]
    DuplicateGroup(String),

    #[error("group `{group_id}`: {message}")]
    InvalidGroup { group_id: String, message: String },

    #[error("line {line}: expected embedding dimension {expected}, found {found}")]
    DimensionMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("embedding table is empty")]
    EmptyTable,

    #[error("no in-vocabulary tokens in {0:?}")]
    NoKnownTokens(String),

    #[error("zero-norm embedding for {0:?}")]
    ZeroVector(String),

    #[error("group `{group_id}` has {count} reference(s), at least two are required")]
    FewerThanTwoReferences { group_id: String, count: usize },

    #[error("group `{group_id}`, pair ({ref_a}, {ref_b}): {source}")]
    PairScoring {
        group_id: String,
        ref_a: String,
        ref_b: String,
        #[source]
        source: Box<Error>,
    },

    #[error("score {0} outside [-1, 1]")]
    ScoreOutOfRange(f64),

    #[error("unknown group_id `{0}`")]
    UnknownGroup(String),

    #[error("group `{group_id}`: incomplete pair set: {message}")]
    IncompletePairSet { group_id: String, message: String },

    #[error("group `{0}` has no similarity score")]
    MissingScore(String),

    #[error("requested {requested} source groups but only {available} are available")]
    NotEnoughGroups { requested: usize, available: usize },

    #[error("repetition pool exhausted: need {needed} groups, pool has {available}")]
    PoolExhausted { needed: usize, available: usize },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("no segments to evaluate")]
    NoSegments,

    #[error("segment `{0}` has no scores")]
    SegmentWithoutScores(String),

    #[error("duplicate score for segment `{segment_id}`, reference `{ref_id}`")]
    DuplicateScore { segment_id: String, ref_id: String },

    #[error("segment sets differ: {0}")]
    SegmentMismatch(String),

    #[error("unknown system `{0}`")]
    UnknownSystem(String),

    #[error("instance ({group_id}, {ref_id}) collides with the delimiter {delimiter:?}")]
    DelimiterCollision {
        group_id: String,
        ref_id: String,
        delimiter: String,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("config: {0}")]
    Config(String),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn invalid(message: impl Into<String>) -> Self {
        Error::InvalidParameter(message.into())
    }

    /// True for errors caused by the caller's parameters rather than the data.
    pub fn is_usage(&self) -> bool {
        matches!(self, Error::InvalidParameter(_) | Error::Config(_))
    }
}
