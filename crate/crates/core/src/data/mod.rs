//! Problems, recorded outcomes, embedding stores, splits, joins, and the
//! synthetic pool generator.

mod embstore;
mod join;
mod outcomes;
mod problems;
mod split;
mod synth;

use std::path::PathBuf;

use thiserror::Error;

use crate::binfmt::FormatError;

pub use embstore::{
    decode_embedding_store, encode_embedding_store, encoded_size, read_embedding_store, write_embedding_store,
    EmbeddingStore, EMBEDDING_MAGIC, EMBEDDING_VERSION,
};
pub use join::{join, Joined};
pub use outcomes::{load_outcomes, parse_outcomes, write_outcomes, Outcome, OutcomeMatrix, OutcomeRecord};
pub use problems::{difficulty_histogram, load_problems, parse_problems, write_problems, Problem};
pub use split::{read_split, split, split_stratified, write_split, Split, SplitSizes, SplitSpec};
pub use synth::{synth_pool, SynthConfig, SynthPool};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {source}")]
    Format { path: PathBuf, source: FormatError },
    #[error("embedding store: {0}")]
    Store(#[from] FormatError),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: duplicate id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: difficulty {value} outside 1..=5")]
    DifficultyOutOfRange { line: usize, value: i64 },
    #[error("line {line}: duplicate outcome for problem {problem:?}, model {model:?}")]
    DuplicateOutcome { line: usize, problem: String, model: String },
    #[error("line {line}: negative or non-finite latency {value}")]
    BadLatency { line: usize, value: String },
    #[error("line {line}: correct must be 0/1/true/false, got {value:?}")]
    BadCorrect { line: usize, value: String },
    #[error("{count} outcome cells missing, first: {first:?}")]
    MissingCells { count: usize, first: Vec<(String, String)> },
    #[error("embedding for {id:?} has dimension {actual}, store dimension is {expected}")]
    DimMismatch { id: String, expected: usize, actual: usize },
    #[error("embedding for {id:?} contains non-finite values")]
    NonFiniteEmbedding { id: String },
    #[error("duplicate embedding id {0:?}")]
    DuplicateEmbedding(String),
    #[error("no embedding for problem {0:?}")]
    MissingEmbedding(String),
    #[error("no label for problem {0:?}")]
    MissingLabel(String),
    #[error("split requests {requested} ids but only {available} are available")]
    SplitOverflow { requested: usize, available: usize },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error("invalid synthetic pool config: {0}")]
    InvalidSynth(String),
    #[error("unknown model {0:?}")]
    UnknownModel(String),
    #[error("unknown problem {0:?}")]
    UnknownProblem(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, DataError>;

pub(crate) fn io_err(path: &std::path::Path) -> impl FnOnce(std::io::Error) -> DataError + '_ {
    move |source| DataError::Io { path: path.to_path_buf(), source }
}
