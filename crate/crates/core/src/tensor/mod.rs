//! Dense linear algebra, feed-forward networks with manual backpropagation,
//! losses, optimizers, training and a finite-difference gradient checker.
//!
//! Everything is computed in `f64`. Reductions run in a fixed order, so a
//! fixed seed reproduces training bit-for-bit on a given platform.

mod checkpoint;
mod gradcheck;
mod loss;
mod matrix;
mod mlp;
mod optim;
mod train;

use thiserror::Error;

use crate::binfmt::FormatError;

pub use checkpoint::{decode_checkpoint, encode_checkpoint, read_checkpoint, write_checkpoint};
pub use gradcheck::{compare_gradients, grad_check, GradCheckReport, ParamLocation};
pub use loss::{sigmoid, sigmoid_bce, softmax_cross_entropy, softmax_rows, LossKind, Targets};
pub use matrix::Matrix;
pub use mlp::{Activation, DenseLayer, ForwardCache, Gradients, LayerGradient, Mlp};
pub use optim::{optimizer_step, AdamState, Optimizer};
pub use train::{train, CheckpointPolicy, Dataset, EpochRecord, TrainConfig, TrainOutcome};

#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{op}: expected dimension {expected}, got {actual}")]
    DimMismatch { op: &'static str, expected: usize, actual: usize },
    #[error("{op}: expected shape {expected:?}, got {actual:?}")]
    ShapeMismatch { op: &'static str, expected: (usize, usize), actual: (usize, usize) },
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    LengthMismatch { rows: usize, cols: usize, len: usize },
    #[error("{op}: non-finite value")]
    NonFinite { op: &'static str },
    #[error("label {label} of sample {sample} is outside [0, {num_classes})")]
    LabelOutOfRange { sample: usize, label: usize, num_classes: usize },
    #[error("empty loss support: mask selects no entries")]
    EmptyLossSupport,
    #[error("forward cache does not belong to the current model parameters")]
    StaleCache,
    #[error("invalid layer chain: {0}")]
    InvalidLayers(String),
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training set is empty")]
    EmptyTrainSet,
    #[error("validation set is required for best-validation checkpointing")]
    MissingValidation,
    #[error("non-finite loss at epoch {epoch}, batch {batch}")]
    NonFiniteLoss { epoch: usize, batch: usize },
    #[error("checkpoint: {0}")]
    Format(#[from] FormatError),
}

pub type Result<T> = std::result::Result<T, TensorError>;
