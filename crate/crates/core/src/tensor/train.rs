use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::loss::Targets;
use super::matrix::Matrix;
use super::mlp::Mlp;
use super::optim::{optimizer_step, AdamState, Optimizer};
use super::{Result, TensorError};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CheckpointPolicy {
    /// Keep the epoch with the lowest validation loss; ties go to the earlier epoch.
    #[default]
    BestValidation,
    Last,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub seed: u64,
    pub optimizer: Optimizer,
    pub checkpoint_policy: CheckpointPolicy,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-5,
            batch_size: 32,
            epochs: 20,
            seed: 0,
            optimizer: Optimizer::default(),
            checkpoint_policy: CheckpointPolicy::BestValidation,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(TensorError::InvalidConfig(format!("learning_rate must be > 0, got {}", self.learning_rate)));
        }
        if self.batch_size == 0 {
            return Err(TensorError::InvalidConfig("batch_size must be >= 1".into()));
        }
        if self.epochs == 0 {
            return Err(TensorError::InvalidConfig("epochs must be >= 1".into()));
        }
        if let Optimizer::Adam { beta1, beta2, epsilon } = self.optimizer {
            if !(0.0..1.0).contains(&beta1) || !(0.0..1.0).contains(&beta2) || !(epsilon > 0.0) {
                return Err(TensorError::InvalidConfig("adam needs beta1, beta2 in [0,1) and epsilon > 0".into()));
            }
        }
        Ok(())
    }
}

/// Inputs paired with their targets.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub targets: Targets,
}

impl Dataset {
    pub fn new(x: Matrix, targets: Targets) -> Result<Self> {
        if targets.len() != x.rows() {
            return Err(TensorError::DimMismatch { op: "Dataset::new", expected: x.rows(), actual: targets.len() });
        }
        Ok(Self { x, targets })
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.x.rows() == 0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_metric: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Mlp,
    pub history: Vec<EpochRecord>,
    /// 1-based epoch whose parameters were returned.
    pub selected_epoch: usize,
}

const EVAL_CHUNK: usize = 256;

/// Mean loss and metric (correct / support) over a dataset, evaluated in chunks.
pub(crate) fn evaluate(model: &Mlp, data: &Dataset) -> Result<Option<(f64, f64)>> {
    let mut loss_sum = 0.0;
    let mut support = 0usize;
    let mut correct = 0usize;
    for start in (0..data.len()).step_by(EVAL_CHUNK) {
        let end = (start + EVAL_CHUNK).min(data.len());
        let targets = data.targets.slice(start, end);
        let s = targets.support();
        if s == 0 {
            continue;
        }
        let logits = model.predict(&data.x.slice_rows(start, end))?;
        let (loss, _) = targets.loss(&logits)?;
        loss_sum += loss * s as f64;
        support += s;
        correct += targets.correct_count(&logits);
    }
    if support == 0 {
        return Ok(None);
    }
    Ok(Some((loss_sum / support as f64, correct as f64 / support as f64)))
}

/// Mini-batch training. Shuffle order comes from `config.seed`; the model's
/// initial parameters come from whoever built it.
pub fn train(model: Mlp, train_set: &Dataset, val_set: Option<&Dataset>, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    if train_set.is_empty() {
        return Err(TensorError::EmptyTrainSet);
    }
    let val_set = val_set.filter(|v| !v.is_empty());
    if val_set.is_none() && config.checkpoint_policy == CheckpointPolicy::BestValidation {
        return Err(TensorError::MissingValidation);
    }
    if train_set.x.cols() != model.input_dim() {
        return Err(TensorError::DimMismatch { op: "train", expected: model.input_dim(), actual: train_set.x.cols() });
    }

    let mut model = model;
    let mut state = AdamState::for_model(&model);
    let mut rng = seed::rng(seed::sub_seed(config.seed, Stream::Shuffle));
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(config.epochs);
    let mut best: Option<(f64, usize, Mlp)> = None;

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut weighted_loss = 0.0;
        let mut seen = 0usize;
        for (batch_no, idx) in order.chunks(config.batch_size).enumerate() {
            let abort = |e: TensorError| match e {
                TensorError::NonFinite { .. } => TensorError::NonFiniteLoss { epoch, batch: batch_no },
                other => other,
            };
            let targets = train_set.targets.select(idx);
            if targets.support() == 0 {
                continue;
            }
            let x = train_set.x.select_rows(idx);
            let (logits, cache) = model.forward(&x).map_err(abort)?;
            let (loss, grad) = targets.loss(&logits).map_err(abort)?;
            if !loss.is_finite() {
                return Err(TensorError::NonFiniteLoss { epoch, batch: batch_no });
            }
            let grads = model.backward(&cache, &grad).map_err(abort)?;
            optimizer_step(&mut model, &grads, &mut state, config).map_err(abort)?;
            weighted_loss += loss * idx.len() as f64;
            seen += idx.len();
        }
        let train_loss = if seen > 0 { weighted_loss / seen as f64 } else { 0.0 };
        let val = match val_set {
            Some(v) => evaluate(&model, v)?,
            None => None,
        };
        history.push(EpochRecord {
            epoch,
            train_loss,
            val_loss: val.map(|(l, _)| l),
            val_metric: val.map(|(_, m)| m),
        });
        if config.checkpoint_policy == CheckpointPolicy::BestValidation {
            if let Some((val_loss, _)) = val {
                if best.as_ref().is_none_or(|(b, _, _)| val_loss < *b) {
                    best = Some((val_loss, epoch, model.clone()));
                }
            }
        }
    }

    let (model, selected_epoch) = match best {
        Some((_, epoch, m)) => (m, epoch),
        None => (model, config.epochs),
    };
    Ok(TrainOutcome { model, history, selected_epoch })
}
