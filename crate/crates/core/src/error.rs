use std::path::PathBuf;

use thiserror::Error;

/// Problems reading or validating corpus files.
#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing corpus file {0}")]
    MissingFile(PathBuf),

    #[error("{file}: {source}")]
    Io {
        file: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{file}: header is missing required column `{column}`")]
    MissingColumn { file: String, column: String },

    /// `row` is the 1-based data row (the header is not counted).
    #[error("{file} row {row}, column `{column}`: {message}")]
    Row {
        file: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("{file} row {row}: {message}")]
    Record {
        file: String,
        row: usize,
        message: String,
    },

    #[error("duplicate topic_id `{0}` in topics.csv")]
    DuplicateTopic(String),

    #[error("duplicate user_id `{0}` in users.csv")]
    DuplicateUser(String),

    #[error("post references unknown user `{user_id}` (topic `{topic_id}`); pass strict_users = false to drop such posts")]
    UnresolvedUser { topic_id: String, user_id: String },

    #[error("post references unknown topic `{0}`")]
    UnresolvedTopic(String),

    #[error("invalid interaction kinds: {0}")]
    Kinds(String),
}

/// Failures of the engagement estimator and likelihood routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimationError {
    #[error("dataset contains no interactions (n = 0)")]
    EmptyData,

    #[error("reference kind `{0}` has zero interactions; choose another reference kind")]
    ZeroReference(String),

    #[error("impossible data: zero mean with a positive count (topic `{topic_id}`, kind `{kind}`)")]
    ImpossibleData { topic_id: String, kind: String },

    #[error("singular gradient: parameter `{0}` is zero while its counts are positive")]
    SingularGradient(String),

    #[error("model does not cover `{0}`")]
    MissingParameter(String),

    #[error("invalid parameter `{name}` = {value}")]
    InvalidParameter { name: String, value: f64 },

    #[error("numeric fit did not converge after {iterations} iterations (residual {residual:e})")]
    NotConverged { iterations: usize, residual: f64 },

    #[error("malformed model JSON: {0}")]
    ModelFormat(String),

    #[error("invalid universe spec: {0}")]
    InvalidSpec(String),
}

/// Failures of the statistics and backtesting helpers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalyticsError {
    #[error("inputs have different lengths ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("need at least {needed} values, got {got}")]
    TooFew { needed: usize, got: usize },

    #[error("correlation undefined: input is constant")]
    ConstantInput,

    #[error("AUC undefined: labels contain a single class")]
    SingleClass,

    #[error("fewer distinct values ({distinct}) than clusters ({k})")]
    TooFewDistinct { distinct: usize, k: usize },

    #[error("non-finite value in input")]
    NonFinite,

    #[error("threshold unavailable: {0}")]
    ThresholdUnavailable(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Failures while computing per-topic features.
#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),

    /// The fit ran but produced no coefficient for the topic. Distinct from an estimate of 0.
    #[error("no engagement estimate for `{topic_id}`: {reason}")]
    NoEstimate { topic_id: String, reason: String },

    #[error(transparent)]
    Corpus(#[from] CorpusError),
}
