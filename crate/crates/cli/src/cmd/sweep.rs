use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use routefit::data::{load_outcomes, load_problems, read_embedding_store, EmbeddingStore};
use routefit::predictors::{layer_sweep, write_sweep_csv, SweepTarget};
use routefit::{CorrectnessConfig, DifficultyConfig};
use serde::{Deserialize, Serialize};

use super::train::{labelled_ids, models_or_all};
use crate::config::{self, require, set, set_some, SplitSource};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    #[default]
    Difficulty,
    Correctness,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepRun {
    /// Directory holding one .rfemb store per layer.
    pub stores: Option<PathBuf>,
    pub target: Target,
    /// Needed for the difficulty target.
    pub problems: Option<PathBuf>,
    /// Needed for the correctness target.
    pub outcomes: Option<PathBuf>,
    pub models: Vec<String>,
    pub split: SplitSource,
    /// Sweep report CSV.
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub difficulty: DifficultyConfig,
    pub correctness: CorrectnessConfig,
}

/// Train one probe per layer store and report the best layer.
#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub stores: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub target: Option<Target>,
    #[arg(long)]
    pub problems: Option<PathBuf>,
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    #[arg(long, value_delimiter = ',')]
    pub models: Option<Vec<String>>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Applies to the selected target's probe.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long, value_delimiter = ',')]
    pub hidden: Option<Vec<usize>>,
}

pub fn resolve(args: SweepArgs) -> Result<SweepRun> {
    let mut c: SweepRun = config::load(args.config.as_deref())?;
    set_some(&mut c.stores, args.stores);
    set(&mut c.target, args.target);
    set_some(&mut c.problems, args.problems);
    set_some(&mut c.outcomes, args.outcomes);
    set(&mut c.models, args.models);
    set_some(&mut c.split.file, args.split);
    set_some(&mut c.out, args.out);
    set(&mut c.seed, args.seed);
    let (hidden, train) = match c.target {
        Target::Difficulty => (&mut c.difficulty.hidden, &mut c.difficulty.train),
        Target::Correctness => (&mut c.correctness.hidden, &mut c.correctness.train),
    };
    set(hidden, args.hidden);
    set(&mut train.epochs, args.epochs);
    set(&mut train.learning_rate, args.lr);
    c.difficulty.train.seed = c.seed;
    c.correctness.train.seed = c.seed;
    Ok(c)
}

/// Every `*.rfemb` in `dir`, by file name.
pub fn load_stores(dir: &Path) -> Result<Vec<EmbeddingStore>> {
    let entries = fs::read_dir(dir).map_err(|e| CliError::data(format!("{}: {e}", dir.display())))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "rfemb"))
        .collect();
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::data(format!("{}: no .rfemb stores", dir.display())));
    }
    paths.iter().map(|p| read_embedding_store(p).map_err(CliError::from)).collect()
}

pub fn run(c: &SweepRun) -> Result<()> {
    let dir = require(&c.stores, "stores", "--stores")?;
    let out = require(&c.out, "out", "--out")?;
    let stores = load_stores(dir)?;
    let refs: Vec<&EmbeddingStore> = stores.iter().collect();
    let report = match c.target {
        Target::Difficulty => {
            let problems = load_problems(require(&c.problems, "problems", "--problems")?)?;
            let (ids, keys) = labelled_ids(&problems, &stores[0]);
            let split = c.split.resolve(c.seed, &ids, Some(&keys))?;
            config::ensure_parent(out)?;
            config::write_snapshot(c, &out.with_extension("resolved_config.json"))?;
            layer_sweep(&refs, SweepTarget::Difficulty { problems: &problems, config: &c.difficulty }, &split)?
        }
        Target::Correctness => {
            let outcomes = load_outcomes(require(&c.outcomes, "outcomes", "--outcomes")?, false)?;
            let models = models_or_all(&c.models, outcomes.models());
            let ids: Vec<String> = outcomes.problems().iter().filter(|id| stores[0].contains(id)).cloned().collect();
            let split = c.split.resolve(c.seed, &ids, None)?;
            config::ensure_parent(out)?;
            config::write_snapshot(c, &out.with_extension("resolved_config.json"))?;
            layer_sweep(&refs, SweepTarget::Correctness { outcomes: &outcomes, model_ids: &models, config: &c.correctness }, &split)?
        }
    };
    write_sweep_csv(out, &report)?;
    println!("best_layer {}", report.best_layer);
    Ok(())
}
