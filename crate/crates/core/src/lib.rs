//! Probe-based model routing.
//!
//! Small MLP probes read problem difficulty and per-model correctness off
//! frozen LLM hidden states; routers use those scores to send each problem
//! to the cheapest model likely to solve it; a replay simulator scores the
//! routers against recorded per-model outcomes.
//!
//! * [`tensor`]: dense matrices, MLPs, losses, optimisers, training, gradient check, checkpoints.
//! * [`data`]: problems, outcome matrices, embedding stores, splits, synthetic pools.
//! * [`predictors`]: difficulty and correctness probes and the per-layer sweep.
//! * [`router`]: threshold, cascade, random and oracle policies.
//! * [`eval`]: replay, sweeps, baselines, dominance, advantage matrix, report bundles.

pub mod binfmt;
pub mod data;
pub mod eval;
pub mod predictors;
pub mod router;
pub mod seed;
pub mod tensor;

pub use binfmt::FormatError;
pub use data::{DataError, EmbeddingStore, OutcomeMatrix, Problem, Split, SplitSpec, SynthConfig};
pub use eval::{EvalError, Policy, Replay, Scores, SystemPoint};
pub use predictors::{CorrectnessConfig, CorrectnessPredictor, DifficultyConfig, DifficultyPredictor, PredictorError};
pub use router::{ModelPool, ModelProfile, PolicyTag, RouterError, RoutingDecision};
pub use tensor::{Matrix, Mlp, TensorError, TrainConfig};

/// Any error from this crate, grouped by module.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Tensor(#[from] TensorError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

impl Error {
    /// True for aborted training (non-finite loss or values).
    pub fn is_numeric(&self) -> bool {
        let t = match self {
            Error::Tensor(t) => Some(t),
            Error::Predictor(PredictorError::Tensor(t)) => Some(t),
            Error::Eval(EvalError::Predictor(PredictorError::Tensor(t))) => Some(t),
            _ => None,
        };
        matches!(t, Some(TensorError::NonFiniteLoss { .. } | TensorError::NonFinite { .. }))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
