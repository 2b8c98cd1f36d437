//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("trace too short: trend operations need at least 2 snapshots, got {got}")]
    TraceTooShort { got: usize },

    #[error("non-finite {what}: {value}")]
    NonFinite { what: &'static str, value: f64 },

    #[error("score {value} outside [0, 1]")]
    ScoreOutOfRange { value: f64 },

    #[error("traces have mixed lengths: expected {expected}, got {got} (example {example_id})")]
    MixedTraceLengths {
        expected: usize,
        got: usize,
        example_id: u64,
    },

    #[error("need at least {need} values, got {got}")]
    TooFewValues { need: usize, got: usize },

    #[error("degenerate distribution: all values equal, no meaningful break")]
    DegenerateDistribution,

    #[error("shape mismatch: expected {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("empty batch")]
    EmptyBatch,

    #[error("degenerate class: {0}")]
    DegenerateClass(String),

    #[error("requested {requested} labeled positives but only {available} positives exist")]
    LabeledExceedsPositives { requested: usize, available: usize },

    #[error("batch size {batch_size} exceeds unlabeled count {unlabeled}")]
    BatchTooLarge { batch_size: usize, unlabeled: usize },

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-finite loss at optimizer step {step}")]
    NumericAbort { step: usize },

    #[error("snapshot index {got} out of range [2, {max}]")]
    StopOutOfRange { got: usize, max: usize },

    #[error("unlearnable hyperplane: |P|/|U| = {ratio} must exceed pi = {pi}")]
    UnlearnableHyperplane { ratio: f64, pi: f64 },

    #[error("concentration bound precondition violated: {quantity} = {value} must be < 1")]
    BoundPrecondition { quantity: &'static str, value: f64 },

    #[error("degenerate partition: {0}")]
    DegeneratePartition(String),

    #[error("evaluation unavailable: {0}")]
    EvaluationUnavailable(String),

    #[error("{stage} stage failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap an error with the pipeline stage it occurred in.
    pub fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |source| Error::Stage {
            stage,
            source: Box::new(source),
        }
    }

    /// The innermost error, unwrapping stage context.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } => source.root(),
            other => other,
        }
    }
}
