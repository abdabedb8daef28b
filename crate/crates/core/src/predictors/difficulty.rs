use std::collections::HashMap;

use serde::Serialize;

use super::{check_dim, DifficultyConfig, PredictorError, Result, TrainRun};
use crate::data::{join, EmbeddingStore, Problem, Split};
use crate::seed::{self, Stream};
use crate::tensor::{train, Dataset, Matrix, Mlp, Targets};

pub const DIFFICULTY_CLASSES: usize = 5;

/// Softmax posterior over levels 1..=5 and its expectation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifficultyPrediction {
    /// `Σ_k k · p_k`, in `[1, 5]`.
    pub score: f64,
    pub distribution: [f64; DIFFICULTY_CLASSES],
    /// Most probable level, 1..=5 (lowest level on ties).
    pub level: u8,
}

impl DifficultyPrediction {
    pub fn from_logits(logits: &[f64]) -> Self {
        assert_eq!(logits.len(), DIFFICULTY_CLASSES);
        let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut distribution = [0.0; DIFFICULTY_CLASSES];
        for (p, &z) in distribution.iter_mut().zip(logits) {
            *p = (z - max).exp();
        }
        let sum: f64 = distribution.iter().sum();
        distribution.iter_mut().for_each(|p| *p /= sum);
        Self::from_distribution(distribution)
    }

    pub fn from_distribution(distribution: [f64; DIFFICULTY_CLASSES]) -> Self {
        let score = distribution.iter().enumerate().map(|(k, p)| (k + 1) as f64 * p).sum::<f64>().clamp(1.0, 5.0);
        let mut best = 0;
        for k in 1..DIFFICULTY_CLASSES {
            if distribution[k] > distribution[best] {
                best = k;
            }
        }
        Self { score, distribution, level: best as u8 + 1 }
    }
}

/// `input → 256 → 64 → 5` by default (hidden widths come from the config).
#[derive(Debug, Clone, PartialEq)]
pub struct DifficultyPredictor {
    pub mlp: Mlp,
    pub embedder_id: String,
    pub layer_index: u32,
    pub config: DifficultyConfig,
    pub run: Option<TrainRun>,
}

impl DifficultyPredictor {
    /// Freshly initialised predictor; weights are seeded from the training seed.
    pub fn new(input_dim: usize, embedder_id: impl Into<String>, layer_index: u32, config: DifficultyConfig) -> Result<Self> {
        let init_seed = seed::sub_seed(config.train.seed, Stream::Init);
        let mlp = Mlp::init(input_dim, &config.hidden, DIFFICULTY_CLASSES, init_seed)?;
        Ok(Self { mlp, embedder_id: embedder_id.into(), layer_index, config, run: None })
    }

    pub fn input_dim(&self) -> usize {
        self.mlp.input_dim()
    }

    pub fn predict(&self, embedding: &[f32]) -> Result<DifficultyPrediction> {
        check_dim(self.input_dim(), embedding.len())?;
        let x = Matrix::from_vec(1, embedding.len(), embedding.iter().map(|&v| f64::from(v)).collect())?;
        Ok(self.predict_matrix(&x)?.remove(0))
    }

    pub fn predict_matrix(&self, x: &Matrix) -> Result<Vec<DifficultyPrediction>> {
        check_dim(self.input_dim(), x.cols())?;
        let logits = self.mlp.predict(x)?;
        Ok((0..logits.rows()).map(|r| DifficultyPrediction::from_logits(logits.row(r))).collect())
    }

    pub(crate) fn check_store(&self, store: &EmbeddingStore) -> Result<()> {
        check_dim(self.input_dim(), store.dim())?;
        check_provenance(&self.embedder_id, self.layer_index, store)
    }
}

pub(crate) fn check_provenance(embedder_id: &str, layer_index: u32, store: &EmbeddingStore) -> Result<()> {
    if store.embedder_id() != embedder_id || store.layer_index() != layer_index {
        return Err(PredictorError::InconsistentStores(format!(
            "predictor was trained on {embedder_id} layer {layer_index}, store is {} layer {}",
            store.embedder_id(),
            store.layer_index()
        )));
    }
    Ok(())
}

pub fn predict_difficulty_score(pred: &DifficultyPredictor, embedding: &[f32]) -> Result<DifficultyPrediction> {
    pred.predict(embedding)
}

/// Difficulty level per labelled problem.
pub fn difficulty_labels(problems: &[Problem]) -> HashMap<String, u8> {
    problems.iter().filter_map(|p| p.difficulty.map(|d| (p.id.clone(), d))).collect()
}

fn dataset(store: &EmbeddingStore, labels: &HashMap<String, u8>, ids: &[String]) -> Result<Dataset> {
    if let Some(id) = ids.iter().find(|id| !labels.contains_key(*id)) {
        return Err(PredictorError::MissingDifficulty(id.clone()));
    }
    let joined = join(store, labels, ids, true)?;
    let classes = joined.y.iter().map(|&d| usize::from(d) - 1).collect();
    Ok(Dataset::new(joined.x, Targets::Classes(classes))?)
}

/// Trains on `split.train`, selects the checkpoint on `split.val`.
pub fn train_difficulty(
    store: &EmbeddingStore,
    problems: &[Problem],
    split: &Split,
    config: &DifficultyConfig,
) -> Result<DifficultyPredictor> {
    let labels = difficulty_labels(problems);
    let train_set = dataset(store, &labels, &split.train)?;
    let val_set = dataset(store, &labels, &split.val)?;
    let pred = DifficultyPredictor::new(store.dim(), store.embedder_id(), store.layer_index(), config.clone())?;
    let out = train(pred.mlp, &train_set, Some(&val_set), &config.train)?;
    Ok(DifficultyPredictor {
        mlp: out.model,
        run: Some(TrainRun { history: out.history, selected_epoch: out.selected_epoch }),
        ..pred
    })
}

/// Per-problem prediction dump alongside aggregate metrics.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifficultyEvaluation {
    /// Top-1 accuracy of the most probable level.
    pub accuracy: f64,
    /// Mean absolute error between expected score and true level.
    pub mae: f64,
    pub n: usize,
    pub ids: Vec<String>,
    pub labels: Vec<u8>,
    pub predictions: Vec<DifficultyPrediction>,
}

pub fn evaluate_difficulty(
    pred: &DifficultyPredictor,
    store: &EmbeddingStore,
    problems: &[Problem],
    ids: &[String],
) -> Result<DifficultyEvaluation> {
    pred.check_store(store)?;
    let labels = difficulty_labels(problems);
    if let Some(id) = ids.iter().find(|id| !labels.contains_key(*id)) {
        return Err(PredictorError::MissingDifficulty(id.clone()));
    }
    let joined = join(store, &labels, ids, true)?;
    let predictions = pred.predict_matrix(&joined.x)?;
    let n = predictions.len();
    let hits = predictions.iter().zip(&joined.y).filter(|(p, &y)| p.level == y).count();
    let abs_err: f64 = predictions.iter().zip(&joined.y).map(|(p, &y)| (p.score - f64::from(y)).abs()).sum();
    let denom = n.max(1) as f64;
    Ok(DifficultyEvaluation {
        accuracy: hits as f64 / denom,
        mae: abs_err / denom,
        n,
        ids: joined.ids,
        labels: joined.y,
        predictions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_distribution_scores_three() {
        let p = DifficultyPrediction::from_logits(&[0.0; 5]);
        assert!((p.score - 3.0).abs() < 1e-12);
        assert_eq!(p.level, 1);
    }

    #[test]
    fn saturated_top_class_scores_five() {
        let p = DifficultyPrediction::from_logits(&[0.0, 0.0, 0.0, 0.0, 800.0]);
        assert!((p.score - 5.0).abs() < 1e-12);
        assert_eq!(p.level, 5);
    }

    #[test]
    fn half_half_scores_one_and_a_half() {
        let p = DifficultyPrediction::from_distribution([0.5, 0.5, 0.0, 0.0, 0.0]);
        assert_eq!(p.score, 1.5);
    }

    #[test]
    fn predict_checks_dimension() {
        let pred = DifficultyPredictor::new(8, "e", 0, DifficultyConfig { hidden: vec![4], ..Default::default() }).unwrap();
        assert!(matches!(pred.predict(&[0.0; 7]), Err(PredictorError::DimMismatch { expected: 8, actual: 7 })));
        assert!(pred.predict(&[0.0; 8]).is_ok());
    }

    #[test]
    fn default_architecture() {
        let pred = DifficultyPredictor::new(5120, "e", 45, DifficultyConfig::default()).unwrap();
        assert_eq!(pred.mlp.dims(), vec![5120, 256, 64, 5]);
    }
}
