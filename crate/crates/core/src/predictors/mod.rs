//! Probes over frozen hidden states: a 5-class difficulty classifier and a
//! multi-model correctness predictor, their evaluation, and the per-layer
//! sweep.

mod correctness;
mod difficulty;
mod files;
mod sweep;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::DataError;
use crate::tensor::{EpochRecord, TensorError, TrainConfig};

pub use correctness::{
    evaluate_correctness, predict_correctness, train_correctness, CorrectnessEvaluation, CorrectnessNet,
    CorrectnessPredictor,
};
pub use difficulty::{
    difficulty_labels, evaluate_difficulty, predict_difficulty_score, train_difficulty, DifficultyEvaluation,
    DifficultyPrediction, DifficultyPredictor, DIFFICULTY_CLASSES,
};
pub use files::{
    read_predictor, write_correctness_predictor, write_difficulty_predictor, write_history_csv, Predictor, PredictorConfig,
    Sidecar, SIDECAR_VERSION,
};
pub use sweep::{layer_sweep, read_sweep_csv, write_sweep_csv, LayerSweepReport, SweepRow, SweepTarget, PRIMARY_METRIC};

#[derive(Debug, Error)]
pub enum PredictorError {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error("embedding dimension {actual} does not match predictor input {expected}")]
    DimMismatch { expected: usize, actual: usize },
    #[error("problem {0:?} has no difficulty label")]
    MissingDifficulty(String),
    #[error("model {0:?} listed more than once")]
    DuplicateModel(String),
    #[error("no target models given")]
    NoModels,
    #[error("inconsistent layer stores: {0}")]
    InconsistentStores(String),
    #[error("predictor file: {0}")]
    Sidecar(String),
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, PredictorError>;

/// Probe architecture and optimisation settings for the difficulty classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DifficultyConfig {
    pub hidden: Vec<usize>,
    pub train: TrainConfig,
}

impl Default for DifficultyConfig {
    fn default() -> Self {
        Self { hidden: vec![256, 64], train: TrainConfig { learning_rate: 1e-5, ..TrainConfig::default() } }
    }
}

/// Probe architecture and optimisation settings for the correctness predictor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorrectnessConfig {
    pub hidden: Vec<usize>,
    /// One shared network with a sigmoid head per model (`true`), or one
    /// single-output network per model (`false`).
    pub per_model_heads: bool,
    pub train: TrainConfig,
}

impl Default for CorrectnessConfig {
    fn default() -> Self {
        Self {
            hidden: vec![8192, 2048, 128],
            per_model_heads: true,
            train: TrainConfig { learning_rate: 5e-6, ..TrainConfig::default() },
        }
    }
}

/// History of one trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainRun {
    pub history: Vec<EpochRecord>,
    pub selected_epoch: usize,
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(PredictorError::DimMismatch { expected, actual });
    }
    Ok(())
}
