use std::fs;
use std::path::PathBuf;

use clap::Args;
use routefit::data::{
    split, split_stratified, synth_pool, write_embedding_store, write_outcomes, write_problems, write_split, SplitSizes, SplitSpec,
    SynthConfig,
};
use routefit::router::{write_pool, ModelPool};
use serde::{Deserialize, Serialize};

use crate::config::{self, set, set_some, SNAPSHOT_NAME};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthRun {
    /// Output directory.
    pub out: Option<PathBuf>,
    pub seed: u64,
    /// Pool generator settings; its `seed` is overwritten by the run seed.
    pub pool: SynthConfig,
    pub split: SplitSizes,
    /// Stratify the split by difficulty level.
    pub stratify: bool,
}

impl Default for SynthRun {
    fn default() -> Self {
        Self {
            out: None,
            seed: 0,
            pool: SynthConfig::default(),
            split: SplitSizes::Fractions { train: 0.6, val: 0.2, eval: 0.2 },
            stratify: true,
        }
    }
}

/// Generate a synthetic pool: per-layer stores, problems, outcomes, pool and split.
#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub n_problems: Option<usize>,
    #[arg(long)]
    pub n_models: Option<usize>,
    #[arg(long)]
    pub dim: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub best_layer: Option<usize>,
    #[arg(long)]
    pub embed_noise: Option<f64>,
    #[arg(long)]
    pub outcome_noise: Option<f64>,
}

pub fn resolve(args: SynthArgs) -> Result<SynthRun> {
    let mut c: SynthRun = config::load(args.config.as_deref())?;
    set_some(&mut c.out, args.out);
    set(&mut c.seed, args.seed);
    set(&mut c.pool.n_problems, args.n_problems);
    set(&mut c.pool.n_models, args.n_models);
    set(&mut c.pool.dim, args.dim);
    set(&mut c.pool.n_layers, args.layers);
    set(&mut c.pool.best_layer, args.best_layer);
    set(&mut c.pool.embed_noise, args.embed_noise);
    set(&mut c.pool.outcome_noise, args.outcome_noise);
    c.pool.seed = c.seed;
    Ok(c)
}

pub fn run(c: &SynthRun) -> Result<()> {
    let out = config::require(&c.out, "out", "--out")?;
    let pool = synth_pool(&c.pool)?;
    let layer_dir = out.join("layers");
    fs::create_dir_all(&layer_dir).map_err(|e| CliError::data(format!("{}: {e}", layer_dir.display())))?;
    config::write_snapshot(c, &out.join(SNAPSHOT_NAME))?;

    for store in &pool.layers {
        write_embedding_store(store, layer_dir.join(format!("layer{}.rfemb", store.layer_index())))?;
    }
    write_problems(out.join("problems.jsonl"), &pool.problems)?;
    write_outcomes(out.join("outcomes.csv"), &pool.outcomes)?;
    write_pool(out.join("pool.json"), &ModelPool::from_latency(&pool.outcomes, &pool.model_ids)?)?;

    let ids: Vec<String> = pool.problems.iter().map(|p| p.id.clone()).collect();
    let spec = SplitSpec { seed: c.seed, sizes: c.split, stratify: c.stratify };
    let s = if c.stratify {
        let keys: Vec<String> = pool.problems.iter().map(|p| p.difficulty.unwrap_or(0).to_string()).collect();
        split_stratified(&ids, &keys, &spec)?
    } else {
        split(&ids, &spec)?
    };
    write_split(out.join("split.json"), &s)?;
    log::info!("wrote {} problems, {} models, {} layers to {}", ids.len(), pool.model_ids.len(), pool.layers.len(), out.display());
    Ok(())
}
