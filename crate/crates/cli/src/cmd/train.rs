use std::path::{Path, PathBuf};

use clap::Args;
use routefit::data::{load_outcomes, load_problems, read_embedding_store, EmbeddingStore, Problem};
use routefit::predictors::{
    evaluate_correctness, evaluate_difficulty, train_correctness, train_difficulty, write_correctness_predictor,
    write_difficulty_predictor, write_history_csv,
};
use routefit::{CorrectnessConfig, DifficultyConfig, TrainConfig};
use serde::{Deserialize, Serialize};

use crate::config::{self, require, set, set_some, with_suffix, SplitSource};
use crate::error::Result;

/// Flags shared by both training commands.
#[derive(Debug, Args)]
pub struct TrainFlags {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Embedding store (.rfemb) for the probed layer.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    /// Split file (split.json).
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// Output base path; files get .rfmlp, .json, .history.csv suffixes.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Hidden widths, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
}

impl TrainFlags {
    fn apply(self, embeddings: &mut Option<PathBuf>, split: &mut SplitSource, out: &mut Option<PathBuf>, seed: &mut u64, hidden: &mut Vec<usize>, train: &mut TrainConfig) {
        set_some(embeddings, self.embeddings);
        set_some(&mut split.file, self.split);
        set_some(out, self.out);
        set(seed, self.seed);
        set(&mut train.epochs, self.epochs);
        set(&mut train.learning_rate, self.lr);
        set(&mut train.batch_size, self.batch_size);
        set(hidden, self.hidden);
        train.seed = *seed;
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainDifficultyRun {
    pub embeddings: Option<PathBuf>,
    /// Problems JSONL with difficulty labels.
    pub problems: Option<PathBuf>,
    pub split: SplitSource,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Probe settings; `train.seed` is overwritten by the run seed.
    pub probe: DifficultyConfig,
}

/// Train the difficulty probe on one layer's embeddings.
#[derive(Debug, Args)]
pub struct TrainDifficultyArgs {
    #[command(flatten)]
    pub common: TrainFlags,
    #[arg(long)]
    pub problems: Option<PathBuf>,
}

pub fn resolve_difficulty(args: TrainDifficultyArgs) -> Result<TrainDifficultyRun> {
    let mut c: TrainDifficultyRun = config::load(args.common.config.as_deref())?;
    set_some(&mut c.problems, args.problems);
    args.common.apply(&mut c.embeddings, &mut c.split, &mut c.out, &mut c.seed, &mut c.probe.hidden, &mut c.probe.train);
    c.probe.train.seed = c.seed;
    Ok(c)
}

/// Labelled problems present in the store, in file order, with their levels.
pub fn labelled_ids(problems: &[Problem], store: &EmbeddingStore) -> (Vec<String>, Vec<String>) {
    problems
        .iter()
        .filter(|p| store.contains(&p.id))
        .filter_map(|p| p.difficulty.map(|d| (p.id.clone(), d.to_string())))
        .unzip()
}

pub fn run_difficulty(c: &TrainDifficultyRun) -> Result<()> {
    let emb = require(&c.embeddings, "embeddings", "--embeddings")?;
    let problems_path = require(&c.problems, "problems", "--problems")?;
    let out = require(&c.out, "out", "--out")?;
    let store = read_embedding_store(emb)?;
    let problems = load_problems(problems_path)?;
    let (ids, keys) = labelled_ids(&problems, &store);
    let split = c.split.resolve(c.seed, &ids, Some(&keys))?;
    config::ensure_parent(out)?;
    config::write_snapshot(c, &snapshot_path(out))?;

    let pred = train_difficulty(&store, &problems, &split, &c.probe)?;
    write_difficulty_predictor(out, &pred)?;
    write_history_csv(with_suffix(out, ".history.csv"), pred.run.as_slice())?;
    if !split.val.is_empty() {
        let ev = evaluate_difficulty(&pred, &store, &problems, &split.val)?;
        println!("val_accuracy {}", ev.accuracy);
        println!("val_mae {}", ev.mae);
    }
    Ok(())
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TrainCorrectnessRun {
    pub embeddings: Option<PathBuf>,
    /// Outcomes CSV.
    pub outcomes: Option<PathBuf>,
    /// Target models in output order; empty means every model in the outcomes.
    pub models: Vec<String>,
    pub split: SplitSource,
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Probe settings; `train.seed` is overwritten by the run seed.
    pub probe: CorrectnessConfig,
}

/// Train the per-model correctness probe on one layer's embeddings.
#[derive(Debug, Args)]
pub struct TrainCorrectnessArgs {
    #[command(flatten)]
    pub common: TrainFlags,
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    /// Target models, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
}

pub fn resolve_correctness(args: TrainCorrectnessArgs) -> Result<TrainCorrectnessRun> {
    let mut c: TrainCorrectnessRun = config::load(args.common.config.as_deref())?;
    set_some(&mut c.outcomes, args.outcomes);
    set(&mut c.models, args.models);
    args.common.apply(&mut c.embeddings, &mut c.split, &mut c.out, &mut c.seed, &mut c.probe.hidden, &mut c.probe.train);
    c.probe.train.seed = c.seed;
    Ok(c)
}

pub fn models_or_all(models: &[String], all: &[String]) -> Vec<String> {
    if models.is_empty() {
        all.to_vec()
    } else {
        models.to_vec()
    }
}

pub fn run_correctness(c: &TrainCorrectnessRun) -> Result<()> {
    let emb = require(&c.embeddings, "embeddings", "--embeddings")?;
    let outcomes_path = require(&c.outcomes, "outcomes", "--outcomes")?;
    let out = require(&c.out, "out", "--out")?;
    let store = read_embedding_store(emb)?;
    let outcomes = load_outcomes(outcomes_path, false)?;
    let models = models_or_all(&c.models, outcomes.models());
    let ids: Vec<String> = outcomes.problems().iter().filter(|id| store.contains(id)).cloned().collect();
    let split = c.split.resolve(c.seed, &ids, None)?;
    config::ensure_parent(out)?;
    config::write_snapshot(c, &snapshot_path(out))?;

    let pred = train_correctness(&store, &outcomes, &models, &split, &c.probe)?;
    write_correctness_predictor(out, &pred)?;
    write_history_csv(with_suffix(out, ".history.csv"), &pred.runs)?;
    if !split.val.is_empty() {
        let ev = evaluate_correctness(&pred, &store, &outcomes, &split.val)?;
        println!("val_accuracy {}", ev.mean_accuracy);
        for (m, a) in ev.model_ids.iter().zip(&ev.per_model_accuracy) {
            println!("val_accuracy:{m} {a}");
        }
    }
    Ok(())
}

/// Snapshot path for a training run writing to `out`.
pub fn snapshot_path(out: &Path) -> PathBuf {
    with_suffix(out, ".resolved_config.json")
}
