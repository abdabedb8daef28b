use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::correctness::{evaluate_correctness, train_correctness};
use super::difficulty::{evaluate_difficulty, train_difficulty};
use super::{CorrectnessConfig, DifficultyConfig, PredictorError, Result, TrainRun};
use crate::data::{EmbeddingStore, OutcomeMatrix, Problem, Split};

/// Metric used to pick the best layer.
pub const PRIMARY_METRIC: &str = "val_accuracy";

/// What each per-layer probe is trained to predict.
#[derive(Debug, Clone, Copy)]
pub enum SweepTarget<'a> {
    Difficulty { problems: &'a [Problem], config: &'a DifficultyConfig },
    Correctness { outcomes: &'a OutcomeMatrix, model_ids: &'a [String], config: &'a CorrectnessConfig },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub layer_index: u32,
    /// `(name, value)` pairs, each in `[0, 1]`; the first is [`PRIMARY_METRIC`].
    pub metrics: Vec<(String, f64)>,
    pub train_loss_first: f64,
    pub train_loss_last: f64,
}

impl SweepRow {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.iter().find(|(n, _)| n == name).map(|(_, v)| *v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LayerSweepReport {
    /// Sorted by layer index.
    pub rows: Vec<SweepRow>,
    pub best_layer: u32,
}

impl LayerSweepReport {
    /// Highest primary metric wins; ties go to the lower layer.
    fn from_rows(mut rows: Vec<SweepRow>) -> Result<Self> {
        rows.sort_by_key(|r| r.layer_index);
        let mut best: Option<(u32, f64)> = None;
        for r in &rows {
            let v = r
                .metric(PRIMARY_METRIC)
                .ok_or_else(|| PredictorError::Sidecar(format!("layer {} lacks {PRIMARY_METRIC}", r.layer_index)))?;
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((r.layer_index, v));
            }
        }
        let best_layer = best.ok_or_else(|| PredictorError::InconsistentStores("no layers to sweep".into()))?.0;
        Ok(Self { rows, best_layer })
    }
}

fn check_stores(stores: &[&EmbeddingStore]) -> Result<()> {
    let Some(first) = stores.first() else {
        return Err(PredictorError::InconsistentStores("no layers to sweep".into()));
    };
    let ids: HashSet<&str> = first.ids().collect();
    let mut layers = HashSet::new();
    for s in stores {
        if s.embedder_id() != first.embedder_id() {
            return Err(PredictorError::InconsistentStores(format!(
                "embedder {:?} differs from {:?}",
                s.embedder_id(),
                first.embedder_id()
            )));
        }
        if !layers.insert(s.layer_index()) {
            return Err(PredictorError::InconsistentStores(format!("layer {} supplied twice", s.layer_index())));
        }
        if s.len() != ids.len() || s.ids().any(|id| !ids.contains(id)) {
            return Err(PredictorError::InconsistentStores(format!(
                "layer {} covers different ids than layer {}",
                s.layer_index(),
                first.layer_index()
            )));
        }
    }
    Ok(())
}

fn loss_summary(runs: &[TrainRun]) -> (f64, f64) {
    let n = runs.len().max(1) as f64;
    let first = runs.iter().filter_map(|r| r.history.first()).map(|e| e.train_loss).sum::<f64>() / n;
    let last = runs.iter().filter_map(|r| r.history.last()).map(|e| e.train_loss).sum::<f64>() / n;
    (first, last)
}

/// Trains one probe per layer with the same config and seed, scoring each on
/// `split.val`.
pub fn layer_sweep(stores: &[&EmbeddingStore], target: SweepTarget<'_>, split: &Split) -> Result<LayerSweepReport> {
    check_stores(stores)?;
    let mut rows = Vec::with_capacity(stores.len());
    for store in stores {
        let row = match target {
            SweepTarget::Difficulty { problems, config } => {
                let pred = train_difficulty(store, problems, split, config)?;
                let ev = evaluate_difficulty(&pred, store, problems, &split.val)?;
                let (first, last) = loss_summary(pred.run.as_slice());
                SweepRow {
                    layer_index: store.layer_index(),
                    metrics: vec![(PRIMARY_METRIC.into(), ev.accuracy)],
                    train_loss_first: first,
                    train_loss_last: last,
                }
            }
            SweepTarget::Correctness { outcomes, model_ids, config } => {
                let pred = train_correctness(store, outcomes, model_ids, split, config)?;
                let ev = evaluate_correctness(&pred, store, outcomes, &split.val)?;
                let (first, last) = loss_summary(&pred.runs);
                let mut metrics = vec![(PRIMARY_METRIC.to_string(), ev.mean_accuracy)];
                for (m, a) in ev.model_ids.iter().zip(&ev.per_model_accuracy) {
                    metrics.push((format!("{PRIMARY_METRIC}:{m}"), *a));
                }
                SweepRow { layer_index: store.layer_index(), metrics, train_loss_first: first, train_loss_last: last }
            }
        };
        log::info!("layer {}: {PRIMARY_METRIC} {:.4}", row.layer_index, row.metrics[0].1);
        rows.push(row);
    }
    LayerSweepReport::from_rows(rows)
}

const TRAIN_LOSS_FIRST: &str = "train_loss_first";
const TRAIN_LOSS_LAST: &str = "train_loss_last";

/// Long format: one `layer,metric_name,value` row per metric, followed by
/// the two loss-curve summaries.
pub fn write_sweep_csv(path: impl AsRef<Path>, report: &LayerSweepReport) -> Result<()> {
    let path = path.as_ref();
    let io = |source| PredictorError::Io { path: path.to_path_buf(), source };
    let file = File::create(path).map_err(io)?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| PredictorError::Data(e.into());
    w.write_record(["layer", "metric_name", "value"]).map_err(csv_err)?;
    for r in &report.rows {
        let layer = r.layer_index.to_string();
        let extra = [(TRAIN_LOSS_FIRST.to_string(), r.train_loss_first), (TRAIN_LOSS_LAST.to_string(), r.train_loss_last)];
        for (name, value) in r.metrics.iter().chain(&extra) {
            w.write_record([layer.as_str(), name.as_str(), &value.to_string()]).map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| io(e.into_error()))?.flush().map_err(io)
}

pub fn read_sweep_csv(path: impl AsRef<Path>) -> Result<LayerSweepReport> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| PredictorError::Io { path: path.to_path_buf(), source })?;
    let mut r = csv::Reader::from_reader(BufReader::new(file));
    let bad = |m: String| PredictorError::Sidecar(format!("{}: {m}", path.display()));
    let headers = r.headers().map_err(|e| PredictorError::Data(e.into()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["layer", "metric_name", "value"] {
        return Err(bad(format!("unexpected header {headers:?}")));
    }
    let mut rows: Vec<SweepRow> = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| PredictorError::Data(e.into()))?;
        let layer: u32 = rec[0].parse().map_err(|_| bad(format!("bad layer {:?}", &rec[0])))?;
        let value: f64 = rec[2].parse().map_err(|_| bad(format!("bad value {:?}", &rec[2])))?;
        let row = match rows.iter_mut().find(|r| r.layer_index == layer) {
            Some(row) => row,
            None => {
                rows.push(SweepRow { layer_index: layer, metrics: Vec::new(), train_loss_first: f64::NAN, train_loss_last: f64::NAN });
                rows.last_mut().unwrap()
            }
        };
        match &rec[1] {
            TRAIN_LOSS_FIRST => row.train_loss_first = value,
            TRAIN_LOSS_LAST => row.train_loss_last = value,
            name => row.metrics.push((name.to_string(), value)),
        }
    }
    LayerSweepReport::from_rows(rows)
}
