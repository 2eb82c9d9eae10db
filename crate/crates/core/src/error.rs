use std::io;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),

    #[error("table error: {0}")]
    Csv(#[from] csv::Error),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("items without annotations: {}", .0.join(", "))]
    UnannotatedItems(Vec<String>),

    #[error("not enough candidates: need {needed}, have {available}")]
    InsufficientCandidates { needed: usize, available: usize },

    #[error("no qualifying instances: {0}")]
    NoQualifying(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("topic vector has length {got}, model expects {expected}")]
    TopicLength { expected: usize, got: usize },

    #[error("training diverged at epoch {epoch} (loss is not finite)")]
    Divergence { epoch: usize },

    #[error("dataset of {size} instances is too small for {folds} folds")]
    DatasetTooSmall { size: usize, folds: usize },

    #[error("unsupported model: {0}")]
    UnsupportedModel(String),

    #[error("statistic is undefined: {0}")]
    Undefined(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("held-out ids overlap training ids: {}", .0.join(", "))]
    Leakage(Vec<String>),

    #[error("bad model file: {0}")]
    Format(String),
}
