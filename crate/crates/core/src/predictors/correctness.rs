use std::collections::HashSet;

use serde::Serialize;

use super::difficulty::check_provenance;
use super::{check_dim, CorrectnessConfig, PredictorError, Result, TrainRun};
use crate::data::{EmbeddingStore, OutcomeMatrix, Split};
use crate::seed::{self, Stream};
use crate::tensor::{sigmoid, train, Dataset, Matrix, Mlp, Targets};

/// Either one trunk with a sigmoid output per model, or one
/// single-output network per model.
#[derive(Debug, Clone, PartialEq)]
pub enum CorrectnessNet {
    Shared(Mlp),
    PerModel(Vec<Mlp>),
}

impl CorrectnessNet {
    pub fn input_dim(&self) -> usize {
        match self {
            CorrectnessNet::Shared(m) => m.input_dim(),
            CorrectnessNet::PerModel(ms) => ms[0].input_dim(),
        }
    }

    pub fn output_dim(&self) -> usize {
        match self {
            CorrectnessNet::Shared(m) => m.output_dim(),
            CorrectnessNet::PerModel(ms) => ms.len(),
        }
    }

    pub fn networks(&self) -> Vec<&Mlp> {
        match self {
            CorrectnessNet::Shared(m) => vec![m],
            CorrectnessNet::PerModel(ms) => ms.iter().collect(),
        }
    }

    /// Logits, one column per model.
    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        match self {
            CorrectnessNet::Shared(m) => Ok(m.predict(x)?),
            CorrectnessNet::PerModel(ms) => {
                let cols: Vec<Matrix> = ms.iter().map(|m| m.predict(x)).collect::<std::result::Result<_, _>>()?;
                let mut data = Vec::with_capacity(x.rows() * ms.len());
                for r in 0..x.rows() {
                    data.extend(cols.iter().map(|c| c.get(r, 0)));
                }
                Ok(Matrix::from_vec(x.rows(), ms.len(), data)?)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorrectnessPredictor {
    pub net: CorrectnessNet,
    /// Output column order.
    pub model_ids: Vec<String>,
    pub embedder_id: String,
    pub layer_index: u32,
    pub config: CorrectnessConfig,
    /// One entry per trained network; empty when untrained.
    pub runs: Vec<TrainRun>,
}

fn check_models(model_ids: &[String]) -> Result<()> {
    if model_ids.is_empty() {
        return Err(PredictorError::NoModels);
    }
    let mut seen = HashSet::new();
    for m in model_ids {
        if !seen.insert(m.as_str()) {
            return Err(PredictorError::DuplicateModel(m.clone()));
        }
    }
    Ok(())
}

impl CorrectnessPredictor {
    pub fn new(
        input_dim: usize,
        model_ids: Vec<String>,
        embedder_id: impl Into<String>,
        layer_index: u32,
        config: CorrectnessConfig,
    ) -> Result<Self> {
        check_models(&model_ids)?;
        let init_seed = seed::sub_seed(config.train.seed, Stream::Init);
        let net = if config.per_model_heads {
            CorrectnessNet::Shared(Mlp::init(input_dim, &config.hidden, model_ids.len(), init_seed)?)
        } else {
            let nets = (0..model_ids.len())
                .map(|k| Mlp::init(input_dim, &config.hidden, 1, seed::derive(init_seed, k as u64)))
                .collect::<std::result::Result<_, _>>()?;
            CorrectnessNet::PerModel(nets)
        };
        Ok(Self { net, model_ids, embedder_id: embedder_id.into(), layer_index, config, runs: Vec::new() })
    }

    pub fn input_dim(&self) -> usize {
        self.net.input_dim()
    }

    pub fn predict(&self, embedding: &[f32]) -> Result<Vec<f64>> {
        check_dim(self.input_dim(), embedding.len())?;
        let x = Matrix::from_vec(1, embedding.len(), embedding.iter().map(|&v| f64::from(v)).collect())?;
        Ok(self.predict_matrix(&x)?.into_vec())
    }

    /// Sigmoid probabilities, rows = inputs, columns aligned with `model_ids`.
    pub fn predict_matrix(&self, x: &Matrix) -> Result<Matrix> {
        check_dim(self.input_dim(), x.cols())?;
        let logits = self.net.logits(x)?;
        let probs = logits.data().iter().map(|&z| sigmoid(z)).collect();
        Ok(Matrix::from_vec(logits.rows(), logits.cols(), probs)?)
    }

    pub(crate) fn check_store(&self, store: &EmbeddingStore) -> Result<()> {
        check_dim(self.input_dim(), store.dim())?;
        check_provenance(&self.embedder_id, self.layer_index, store)
    }
}

pub fn predict_correctness(pred: &CorrectnessPredictor, embedding: &[f32]) -> Result<Vec<f64>> {
    pred.predict(embedding)
}

/// 0/1 targets (rows = ids, columns = models) with an all-ones mask.
fn targets(outcomes: &OutcomeMatrix, ids: &[String], model_ids: &[String]) -> Result<(Matrix, Matrix)> {
    outcomes.require_complete(ids, model_ids)?;
    let mut t = Vec::with_capacity(ids.len() * model_ids.len());
    for pid in ids {
        for mid in model_ids {
            let o = outcomes.get(pid, mid).expect("completeness checked");
            t.push(if o.correct { 1.0 } else { 0.0 });
        }
    }
    let t = Matrix::from_vec(ids.len(), model_ids.len(), t)?;
    let mask = Matrix::from_vec(ids.len(), model_ids.len(), vec![1.0; ids.len() * model_ids.len()])?;
    Ok((t, mask))
}

fn column(m: &Matrix, c: usize) -> Matrix {
    let data = (0..m.rows()).map(|r| m.get(r, c)).collect();
    Matrix::from_vec(m.rows(), 1, data).expect("finite column")
}

pub fn train_correctness(
    store: &EmbeddingStore,
    outcomes: &OutcomeMatrix,
    model_ids: &[String],
    split: &Split,
    config: &CorrectnessConfig,
) -> Result<CorrectnessPredictor> {
    check_models(model_ids)?;
    let (train_x, val_x) = (store.matrix(&split.train)?, store.matrix(&split.val)?);
    let (train_t, train_m) = targets(outcomes, &split.train, model_ids)?;
    let (val_t, val_m) = targets(outcomes, &split.val, model_ids)?;
    let pred = CorrectnessPredictor::new(
        store.dim(),
        model_ids.to_vec(),
        store.embedder_id(),
        store.layer_index(),
        config.clone(),
    )?;
    let (net, runs) = match pred.net {
        CorrectnessNet::Shared(mlp) => {
            let tr = Dataset::new(train_x, Targets::Binary { targets: train_t, mask: train_m })?;
            let va = Dataset::new(val_x, Targets::Binary { targets: val_t, mask: val_m })?;
            let out = train(mlp, &tr, Some(&va), &config.train)?;
            let run = TrainRun { history: out.history, selected_epoch: out.selected_epoch };
            (CorrectnessNet::Shared(out.model), vec![run])
        }
        CorrectnessNet::PerModel(nets) => {
            let mut trained = Vec::with_capacity(nets.len());
            let mut runs = Vec::with_capacity(nets.len());
            for (k, mlp) in nets.into_iter().enumerate() {
                let tr = Dataset::new(
                    train_x.clone(),
                    Targets::Binary { targets: column(&train_t, k), mask: column(&train_m, k) },
                )?;
                let va =
                    Dataset::new(val_x.clone(), Targets::Binary { targets: column(&val_t, k), mask: column(&val_m, k) })?;
                let out = train(mlp, &tr, Some(&va), &config.train)?;
                runs.push(TrainRun { history: out.history, selected_epoch: out.selected_epoch });
                trained.push(out.model);
            }
            (CorrectnessNet::PerModel(trained), runs)
        }
    };
    Ok(CorrectnessPredictor { net, runs, ..pred })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrectnessEvaluation {
    pub model_ids: Vec<String>,
    /// Accuracy of `p > 0.5` against the recorded bit, per model.
    pub per_model_accuracy: Vec<f64>,
    pub mean_accuracy: f64,
    pub n: usize,
    pub ids: Vec<String>,
    /// Rows aligned with `ids`, columns with `model_ids`.
    pub probabilities: Vec<Vec<f64>>,
    pub labels: Vec<Vec<bool>>,
}

pub fn evaluate_correctness(
    pred: &CorrectnessPredictor,
    store: &EmbeddingStore,
    outcomes: &OutcomeMatrix,
    ids: &[String],
) -> Result<CorrectnessEvaluation> {
    pred.check_store(store)?;
    let model_ids = &pred.model_ids;
    let (t, _) = targets(outcomes, ids, model_ids)?;
    let probs = pred.predict_matrix(&store.matrix(ids)?)?;
    let m = model_ids.len();
    let mut hits = vec![0usize; m];
    let mut probabilities = Vec::with_capacity(ids.len());
    let mut labels = Vec::with_capacity(ids.len());
    for r in 0..ids.len() {
        let row: Vec<bool> = t.row(r).iter().map(|&v| v > 0.5).collect();
        for k in 0..m {
            if (probs.get(r, k) > 0.5) == row[k] {
                hits[k] += 1;
            }
        }
        probabilities.push(probs.row(r).to_vec());
        labels.push(row);
    }
    let denom = ids.len().max(1) as f64;
    let per_model_accuracy: Vec<f64> = hits.iter().map(|&h| h as f64 / denom).collect();
    let mean_accuracy = per_model_accuracy.iter().sum::<f64>() / m as f64;
    Ok(CorrectnessEvaluation {
        model_ids: model_ids.clone(),
        per_model_accuracy,
        mean_accuracy,
        n: ids.len(),
        ids: ids.to_vec(),
        probabilities,
        labels,
    })
}
