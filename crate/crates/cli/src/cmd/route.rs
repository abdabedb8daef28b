use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use routefit::data::{load_outcomes, read_embedding_store, read_split, EmbeddingStore};
use routefit::eval::{
    dominance_report, emit_report, parse_grid, prefixed_path, random_segment, score_correctness, score_difficulty, simulate,
    threshold_sweep, Report,
};
use routefit::predictors::{read_predictor, Predictor};
use routefit::router::read_pool;
use routefit::{ModelPool, Policy, Replay, Scores, SystemPoint};
use serde::{Deserialize, Serialize};

use crate::config::{self, require, set, set_some, SNAPSHOT_NAME};
use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum PolicyKind {
    Difficulty,
    Cascade,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RouteEvalRun {
    pub policy: Option<PolicyKind>,
    /// Predictor sidecar JSON; unused by the oracle.
    pub predictor: Option<PathBuf>,
    /// Store for the predictor's layer; unused by the oracle.
    pub embeddings: Option<PathBuf>,
    pub outcomes: Option<PathBuf>,
    /// Pool JSON; defaults to every outcome model ranked by mean latency.
    pub pool: Option<PathBuf>,
    /// Split file whose `eval` ids are replayed; without it every outcome problem is.
    pub split: Option<PathBuf>,
    /// Threshold grid; defaults to 2.1:2.9:0.1 (difficulty) or 0.05:0.9:0.05 (cascade).
    pub grid: Option<String>,
    /// Difficulty policy pair; default to the cheapest and largest pool models.
    pub small: Option<String>,
    pub large: Option<String>,
    /// Mixing weights for the random-assignment segment.
    pub lambdas: String,
    /// Report prefix: a directory (trailing `/`) or a file-name prefix.
    pub out: Option<PathBuf>,
}

impl Default for RouteEvalRun {
    fn default() -> Self {
        Self {
            policy: None,
            predictor: None,
            embeddings: None,
            outcomes: None,
            pool: None,
            split: None,
            grid: None,
            small: None,
            large: None,
            lambdas: "0:1:0.1".into(),
            out: None,
        }
    }
}

/// Replay a routing policy over recorded outcomes and emit a report bundle.
#[derive(Debug, Args)]
pub struct RouteEvalArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub policy: Option<PolicyKind>,
    #[arg(long)]
    pub predictor: Option<PathBuf>,
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long)]
    pub outcomes: Option<PathBuf>,
    #[arg(long)]
    pub pool: Option<PathBuf>,
    #[arg(long)]
    pub split: Option<PathBuf>,
    /// `start:end:step`, `start:end`, or a comma list.
    #[arg(long)]
    pub grid: Option<String>,
    #[arg(long)]
    pub small: Option<String>,
    #[arg(long)]
    pub large: Option<String>,
    #[arg(long)]
    pub lambdas: Option<String>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn resolve(args: RouteEvalArgs) -> Result<RouteEvalRun> {
    let mut c: RouteEvalRun = config::load(args.config.as_deref())?;
    set_some(&mut c.policy, args.policy);
    set_some(&mut c.predictor, args.predictor);
    set_some(&mut c.embeddings, args.embeddings);
    set_some(&mut c.outcomes, args.outcomes);
    set_some(&mut c.pool, args.pool);
    set_some(&mut c.split, args.split);
    set_some(&mut c.grid, args.grid);
    set_some(&mut c.small, args.small);
    set_some(&mut c.large, args.large);
    set(&mut c.lambdas, args.lambdas);
    set_some(&mut c.out, args.out);
    Ok(c)
}

/// Makes sure the directory a report prefix writes into exists.
pub fn prepare_prefix(prefix: &Path) -> Result<()> {
    let s = prefix.as_os_str().to_string_lossy();
    if s.ends_with('/') || s.ends_with(std::path::MAIN_SEPARATOR) {
        fs::create_dir_all(prefix).map_err(|e| CliError::data(format!("{}: {e}", prefix.display())))
    } else {
        config::ensure_parent(prefix)
    }
}

fn load_scored_inputs(c: &RouteEvalRun) -> Result<(Predictor, EmbeddingStore)> {
    let pred = read_predictor(require(&c.predictor, "predictor", "--predictor")?)?;
    let store = read_embedding_store(require(&c.embeddings, "embeddings", "--embeddings")?)?;
    let (embedder, layer) = match &pred {
        Predictor::Difficulty(p) => (&p.embedder_id, p.layer_index),
        Predictor::Correctness(p) => (&p.embedder_id, p.layer_index),
    };
    if *embedder != store.embedder_id() || layer != store.layer_index() {
        return Err(CliError::data(format!(
            "predictor was trained on {embedder:?} layer {layer}, store is {:?} layer {}",
            store.embedder_id(),
            store.layer_index()
        )));
    }
    Ok((pred, store))
}

pub fn run(c: &RouteEvalRun) -> Result<()> {
    let policy = *require(&c.policy, "policy", "--policy")?;
    let outcomes = load_outcomes(require(&c.outcomes, "outcomes", "--outcomes")?, false)?;
    let out = require(&c.out, "out", "--out")?;
    let pool = match &c.pool {
        Some(p) => read_pool(p)?,
        None => ModelPool::from_latency(&outcomes, outcomes.models())?,
    };
    let ids = match &c.split {
        Some(p) => read_split(p)?.eval,
        None => {
            log::warn!("no split given; replaying all {} outcome problems", outcomes.problems().len());
            outcomes.problems().to_vec()
        }
    };
    if ids.is_empty() {
        return Err(CliError::config("no evaluation ids to replay"));
    }
    let lambdas = parse_grid(&c.lambdas)?;
    let grid = |default: &str| parse_grid(c.grid.as_deref().unwrap_or(default));
    prepare_prefix(out)?;
    config::write_snapshot(c, &prefixed_path(out, SNAPSHOT_NAME))?;

    let mut report = Report::default();
    let (router_points, replay, small, large) = match policy {
        PolicyKind::Oracle => {
            let replay = Replay::new(&outcomes, &pool, &ids)?;
            let (pt, decisions) = simulate(&Policy::Oracle, &Scores::None, None, &replay)?;
            report.points.push(pt);
            report.decisions = decisions;
            report.pool = Some(replay.pool().clone());
            emit_report(&report, out)?;
            return Ok(());
        }
        PolicyKind::Difficulty => {
            let small = c.small.clone().unwrap_or_else(|| pool.cheapest().model_id.clone());
            let large = c.large.clone().unwrap_or_else(|| pool.largest().model_id.clone());
            let replay = Replay::new(&outcomes, &pool.subset(&[small.clone(), large.clone()])?, &ids)?;
            let (pred, store) = load_scored_inputs(c)?;
            let Predictor::Difficulty(pred) = pred else {
                return Err(CliError::config("difficulty policy needs a difficulty predictor"));
            };
            let scores = score_difficulty(&pred, &store, &ids)?;
            let sweep = threshold_sweep(&Policy::Difficulty { small: small.clone(), large: large.clone() }, &scores, &grid("2.1:2.9:0.1")?, &replay)?;
            (sweep, replay, small, large)
        }
        PolicyKind::Cascade => {
            let replay = Replay::new(&outcomes, &pool, &ids)?;
            let (pred, store) = load_scored_inputs(c)?;
            let Predictor::Correctness(pred) = pred else {
                return Err(CliError::config("cascade policy needs a correctness predictor"));
            };
            let scores = score_correctness(&pred, &store, &ids, replay.pool())?;
            let sweep = threshold_sweep(&Policy::Cascade, &scores, &grid("0.05:0.9:0.05")?, &replay)?;
            (sweep, replay, pool.cheapest().model_id.clone(), pool.largest().model_id.clone())
        }
    };

    let mut points: Vec<SystemPoint> = Vec::with_capacity(router_points.len());
    for (p, d) in router_points {
        points.push(p);
        report.decisions.extend(d);
    }
    let (a, b) = (replay.baseline(&small)?, replay.baseline(&large)?);
    let (segment, seg_points) = random_segment(&a, &b, &lambdas)?;
    report.dominance = dominance_report(&points, &segment);
    report.segments.push((format!("random:{small}:{large}"), seg_points));
    report.points = points;
    for m in replay.pool().model_ids() {
        report.points.push(replay.baseline(&m)?);
    }
    report.pool = Some(replay.pool().clone());
    emit_report(&report, out)?;
    for row in &report.dominance {
        log::info!("{} threshold {:?}: accuracy {:.4}, latency {:.3}s, margin {:+.4}", row.label, row.threshold, row.accuracy, row.mean_latency_s, row.margin);
    }
    Ok(())
}
