//! Replay simulation: policies plus recorded outcomes become
//! (accuracy, mean latency) points, swept over thresholds and compared
//! against baselines.
//!
//! Cost is the recorded latency of the chosen model on each problem. Means
//! are summed in ascending value order, so a point does not depend on the
//! order of the evaluation ids and a constant policy reproduces its
//! baseline bit for bit.

mod advantage;
mod baseline;
mod report;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, EmbeddingStore, OutcomeMatrix};
use crate::predictors::{CorrectnessPredictor, DifficultyPredictor, PredictorError};
use crate::router::{
    route_cascade, route_difficulty, route_oracle, ModelPool, PolicyTag, RouterError, RoutingDecision,
};

pub use advantage::{advantage_matrix, AdvantageMatrix};
pub use baseline::{
    dominance_report, monte_carlo_segment, random_assignment, random_segment, BaselineSegment, DominanceRow,
    MonteCarloSummary, SegmentPoint,
};
pub use report::{emit_report, load_report, prefixed_path, FileEntry, Manifest, Report, MANIFEST_VERSION};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Router(#[from] RouterError),
    #[error(transparent)]
    Predictor(#[from] PredictorError),
    #[error("{count} evaluation ids lack an embedding, first: {first:?}")]
    MissingEmbeddings { count: usize, first: Vec<String> },
    #[error("thresholds must be sorted ascending")]
    UnsortedThresholds,
    #[error("policy {0} needs a threshold")]
    MissingThreshold(PolicyTag),
    #[error("policy {policy} needs {needs} scores")]
    WrongScores { policy: PolicyTag, needs: &'static str },
    #[error("{0} scores for {1} evaluation problems")]
    ScoreCount(usize, usize),
    #[error("predictor has no output for pool model {0:?}")]
    ModelNotPredicted(String),
    #[error("decision {index} is for {found:?}, expected {expected:?}")]
    DecisionOrder { index: usize, expected: String, found: String },
    #[error("malformed grid {0:?}; expected start:end:step")]
    BadGrid(String),
    #[error("report: {0}")]
    Report(String),
    #[error("checksum mismatch for {file}: manifest {expected:08x}, file {actual:08x}")]
    Checksum { file: String, expected: u32, actual: u32 },
    #[error("{path}: {source}")]
    Io { path: std::path::PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;

/// One evaluated system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemPoint {
    pub label: String,
    pub threshold: Option<f64>,
    pub accuracy: f64,
    pub mean_latency_s: f64,
    pub n_problems: usize,
    /// Problems routed to each model.
    pub counts: IndexMap<String, usize>,
}

impl SystemPoint {
    pub fn n_correct(&self) -> usize {
        (self.accuracy * self.n_problems as f64).round() as usize
    }
}

pub(crate) fn order_free_mean(values: &mut [f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    values.sort_by(f64::total_cmp);
    values.iter().sum::<f64>() / values.len() as f64
}

fn point(label: String, threshold: Option<f64>, hits: usize, latencies: &mut [f64], counts: IndexMap<String, usize>) -> SystemPoint {
    let n = latencies.len();
    SystemPoint {
        label,
        threshold,
        accuracy: if n == 0 { 0.0 } else { hits as f64 / n as f64 },
        mean_latency_s: order_free_mean(latencies),
        n_problems: n,
        counts,
    }
}

/// Outcomes for evaluation ids × pool models, checked complete.
#[derive(Debug, Clone)]
pub struct Replay {
    ids: Vec<String>,
    pool: ModelPool,
    correct: Vec<bool>,
    latency: Vec<f64>,
}

impl Replay {
    pub fn new(outcomes: &OutcomeMatrix, pool: &ModelPool, eval_ids: &[String]) -> Result<Self> {
        pool.check_against(outcomes)?;
        let models = pool.model_ids();
        outcomes.require_complete(eval_ids, &models)?;
        let mut correct = Vec::with_capacity(eval_ids.len() * models.len());
        let mut latency = Vec::with_capacity(eval_ids.len() * models.len());
        for pid in eval_ids {
            for m in &models {
                let o = outcomes.get(pid, m).expect("completeness checked");
                correct.push(o.correct);
                latency.push(o.latency_s);
            }
        }
        Ok(Self { ids: eval_ids.to_vec(), pool: pool.clone(), correct, latency })
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn pool(&self) -> &ModelPool {
        &self.pool
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// `k` is the pool position.
    pub fn correct(&self, i: usize, k: usize) -> bool {
        self.correct[i * self.pool.len() + k]
    }

    pub fn latency(&self, i: usize, k: usize) -> f64 {
        self.latency[i * self.pool.len() + k]
    }

    pub fn row(&self, i: usize) -> Vec<Option<bool>> {
        (0..self.pool.len()).map(|k| Some(self.correct(i, k))).collect()
    }

    /// Correct on at least one pool model, over all problems.
    pub fn union_accuracy(&self) -> f64 {
        let hits = (0..self.len()).filter(|&i| (0..self.pool.len()).any(|k| self.correct(i, k))).count();
        hits as f64 / self.len().max(1) as f64
    }

    fn zero_counts(&self) -> IndexMap<String, usize> {
        self.pool.profiles().iter().map(|p| (p.model_id.clone(), 0)).collect()
    }

    /// Always-`model_id` system, counts over the whole pool.
    pub fn baseline(&self, model_id: &str) -> Result<SystemPoint> {
        let k = self.pool.position(model_id).ok_or_else(|| RouterError::UnknownModel(model_id.to_string()))?;
        let hits = (0..self.len()).filter(|&i| self.correct(i, k)).count();
        let mut lat: Vec<f64> = (0..self.len()).map(|i| self.latency(i, k)).collect();
        let mut counts = self.zero_counts();
        counts[k] = self.len();
        Ok(point(format!("baseline:{model_id}"), None, hits, &mut lat, counts))
    }

    /// Reads each decision's chosen model on its problem; `decisions` must
    /// follow `ids()` order.
    pub fn replay(&self, decisions: &[RoutingDecision], label: impl Into<String>, threshold: Option<f64>) -> Result<SystemPoint> {
        if decisions.len() != self.len() {
            return Err(EvalError::ScoreCount(decisions.len(), self.len()));
        }
        let mut counts = self.zero_counts();
        let mut hits = 0;
        let mut lat = Vec::with_capacity(self.len());
        for (i, d) in decisions.iter().enumerate() {
            if d.problem_id != self.ids[i] {
                return Err(EvalError::DecisionOrder { index: i, expected: self.ids[i].clone(), found: d.problem_id.clone() });
            }
            let k = self.pool.position(&d.model_id).ok_or_else(|| RouterError::UnknownModel(d.model_id.clone()))?;
            hits += usize::from(self.correct(i, k));
            lat.push(self.latency(i, k));
            counts[k] += 1;
        }
        Ok(point(label.into(), threshold, hits, &mut lat, counts))
    }
}

/// Always-`model_id` system over `eval_ids`.
pub fn baseline_point(model_id: &str, eval_ids: &[String], outcomes: &OutcomeMatrix) -> Result<SystemPoint> {
    let ids = [model_id.to_string()];
    outcomes.require_complete(eval_ids, &ids)?;
    let mut hits = 0;
    let mut lat = Vec::with_capacity(eval_ids.len());
    for pid in eval_ids {
        let o = outcomes.get(pid, model_id).expect("completeness checked");
        hits += usize::from(o.correct);
        lat.push(o.latency_s);
    }
    let counts = IndexMap::from([(model_id.to_string(), eval_ids.len())]);
    Ok(point(format!("baseline:{model_id}"), None, hits, &mut lat, counts))
}

/// Per-problem predictor outputs, computed once per sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum Scores {
    None,
    Difficulty(Vec<f64>),
    /// Rows follow the evaluation ids, columns the pool order.
    Correctness(Vec<Vec<f64>>),
}

impl Scores {
    fn len(&self) -> Option<usize> {
        match self {
            Scores::None => None,
            Scores::Difficulty(v) => Some(v.len()),
            Scores::Correctness(v) => Some(v.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Policy {
    Difficulty { small: String, large: String },
    Cascade,
    Oracle,
    Constant { model_id: String },
}

impl Policy {
    pub fn tag(&self) -> PolicyTag {
        match self {
            Policy::Difficulty { .. } => PolicyTag::Difficulty,
            Policy::Cascade => PolicyTag::Cascade,
            Policy::Oracle => PolicyTag::Oracle,
            Policy::Constant { .. } => PolicyTag::Baseline,
        }
    }
}

fn missing_embeddings(store: &EmbeddingStore, ids: &[String]) -> Result<()> {
    let missing: Vec<&String> = ids.iter().filter(|id| !store.contains(id)).collect();
    if missing.is_empty() {
        return Ok(());
    }
    Err(EvalError::MissingEmbeddings { count: missing.len(), first: missing.into_iter().take(10).cloned().collect() })
}

const SCORE_CHUNK: usize = 256;

pub fn score_difficulty(pred: &DifficultyPredictor, store: &EmbeddingStore, ids: &[String]) -> Result<Scores> {
    missing_embeddings(store, ids)?;
    let mut out = Vec::with_capacity(ids.len());
    for chunk in ids.chunks(SCORE_CHUNK) {
        let x = store.matrix(chunk)?;
        out.extend(pred.predict_matrix(&x)?.into_iter().map(|p| p.score));
    }
    Ok(Scores::Difficulty(out))
}

/// Probabilities reordered to pool order; the predictor may cover extra models.
pub fn score_correctness(pred: &CorrectnessPredictor, store: &EmbeddingStore, ids: &[String], pool: &ModelPool) -> Result<Scores> {
    missing_embeddings(store, ids)?;
    let cols = pool
        .profiles()
        .iter()
        .map(|p| pred.model_ids.iter().position(|m| *m == p.model_id).ok_or_else(|| EvalError::ModelNotPredicted(p.model_id.clone())))
        .collect::<Result<Vec<_>>>()?;
    let mut out = Vec::with_capacity(ids.len());
    for chunk in ids.chunks(SCORE_CHUNK) {
        let probs = pred.predict_matrix(&store.matrix(chunk)?)?;
        for r in 0..probs.rows() {
            out.push(cols.iter().map(|&c| probs.get(r, c)).collect());
        }
    }
    Ok(Scores::Correctness(out))
}

/// Recorded correctness as 0/1 probabilities: a predictor that is never wrong.
pub fn perfect_correctness(replay: &Replay) -> Scores {
    Scores::Correctness(
        (0..replay.len()).map(|i| (0..replay.pool().len()).map(|k| if replay.correct(i, k) { 1.0 } else { 0.0 }).collect()).collect(),
    )
}

/// One decision per evaluation problem, in `replay.ids()` order.
pub fn decide(policy: &Policy, scores: &Scores, threshold: Option<f64>, replay: &Replay) -> Result<Vec<RoutingDecision>> {
    if let Some(n) = scores.len() {
        if n != replay.len() {
            return Err(EvalError::ScoreCount(n, replay.len()));
        }
    }
    let pool = replay.pool();
    let ids = replay.ids();
    let wrong = |needs| EvalError::WrongScores { policy: policy.tag(), needs };
    match policy {
        Policy::Difficulty { small, large } => {
            let Scores::Difficulty(s) = scores else { return Err(wrong("difficulty")) };
            let small = pool.get(small).ok_or_else(|| RouterError::UnknownModel(small.clone()))?;
            let large = pool.get(large).ok_or_else(|| RouterError::UnknownModel(large.clone()))?;
            let t = threshold.ok_or(EvalError::MissingThreshold(policy.tag()))?;
            ids.iter().zip(s).map(|(id, &score)| Ok(route_difficulty(id, score, t, small, large)?)).collect()
        }
        Policy::Cascade => {
            let Scores::Correctness(p) = scores else { return Err(wrong("correctness")) };
            let t = threshold.ok_or(EvalError::MissingThreshold(policy.tag()))?;
            ids.iter().zip(p).map(|(id, probs)| Ok(route_cascade(id, probs, t, pool)?)).collect()
        }
        Policy::Oracle => (0..replay.len()).map(|i| Ok(route_oracle(&ids[i], &replay.row(i), pool)?)).collect(),
        Policy::Constant { model_id } => {
            let m = pool.get(model_id).ok_or_else(|| RouterError::UnknownModel(model_id.clone()))?;
            Ok(ids
                .iter()
                .map(|id| RoutingDecision {
                    problem_id: id.clone(),
                    model_id: m.model_id.clone(),
                    cost_rank: m.cost_rank,
                    policy: PolicyTag::Baseline,
                    scores: Vec::new(),
                    threshold: None,
                })
                .collect())
        }
    }
}

fn policy_label(policy: &Policy) -> String {
    match policy {
        Policy::Constant { model_id } => format!("baseline:{model_id}"),
        other => other.tag().to_string(),
    }
}

/// Decide, then replay.
pub fn simulate(policy: &Policy, scores: &Scores, threshold: Option<f64>, replay: &Replay) -> Result<(SystemPoint, Vec<RoutingDecision>)> {
    let decisions = decide(policy, scores, threshold, replay)?;
    let point = replay.replay(&decisions, policy_label(policy), threshold)?;
    Ok((point, decisions))
}

/// One point per threshold, scores reused; thresholds must be ascending.
pub fn threshold_sweep(
    policy: &Policy,
    scores: &Scores,
    thresholds: &[f64],
    replay: &Replay,
) -> Result<Vec<(SystemPoint, Vec<RoutingDecision>)>> {
    if thresholds.windows(2).any(|w| !(w[0] <= w[1])) {
        return Err(EvalError::UnsortedThresholds);
    }
    thresholds.iter().map(|&t| simulate(policy, scores, Some(t), replay)).collect()
}

/// `start:end:step` inclusive, `start:end` stepping by one unit in the last
/// decimal place written, or a comma list. Range values are rounded to the
/// decimals written.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = || EvalError::BadGrid(spec.to_string());
    if spec.contains(',') || !spec.contains(':') {
        let v: Vec<f64> = spec.split(',').map(|t| t.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_>>()?;
        if v.iter().any(|x| !x.is_finite()) {
            return Err(bad());
        }
        return Ok(v);
    }
    let parts: Vec<&str> = spec.split(':').collect();
    let (a, b, s) = match parts.as_slice() {
        [a, b, s] => (*a, *b, Some(*s)),
        [a, b] => (*a, *b, None),
        _ => return Err(bad()),
    };
    let decimals = parts.iter().map(|p| p.split_once('.').map_or(0, |(_, f)| f.len())).max().unwrap_or(0);
    if decimals > 9 {
        return Err(bad());
    }
    let scale = 10f64.powi(decimals as i32);
    let int = |t: &str| -> Result<i64> {
        let v: f64 = t.trim().parse().map_err(|_| bad())?;
        if !v.is_finite() {
            return Err(bad());
        }
        Ok((v * scale).round() as i64)
    };
    let (start, end) = (int(a)?, int(b)?);
    let step = match s {
        Some(s) => int(s)?,
        None => 1,
    };
    if step <= 0 || end < start || (end - start) / step > 100_000 {
        return Err(bad());
    }
    Ok((0..=(end - start) / step).map(|i| (start + i * step) as f64 / scale).collect())
}

/// 2.1, 2.2, …, 2.9.
pub fn default_difficulty_grid() -> Vec<f64> {
    (21..=29).map(|k| k as f64 / 10.0).collect()
}

/// 0.05, 0.10, …, 0.90.
pub fn default_cascade_grid() -> Vec<f64> {
    (1..=18).map(|k| k as f64 / 20.0).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::OutcomeRecord;
    use crate::router::ModelProfile;

    pub(crate) fn matrix(rows: &[(&str, &str, bool, f64)]) -> OutcomeMatrix {
        OutcomeMatrix::from_records(rows.iter().map(|&(p, m, c, l)| OutcomeRecord {
            problem_id: p.into(),
            model_id: m.into(),
            correct: c,
            latency_s: l,
        }))
        .unwrap()
    }

    fn ids(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn two_models() -> (OutcomeMatrix, ModelPool) {
        let m = matrix(&[
            ("p1", "s", true, 1.0),
            ("p1", "l", true, 4.0),
            ("p2", "s", false, 2.0),
            ("p2", "l", true, 6.0),
            ("p3", "s", false, 1.5),
            ("p3", "l", false, 5.0),
        ]);
        let pool = ModelPool::new(vec![ModelProfile::new("s", 0), ModelProfile::new("l", 1)]).unwrap();
        (m, pool)
    }

    #[test]
    fn hand_micro_case() {
        let (m, pool) = two_models();
        let r = Replay::new(&m, &pool, &ids(&["p1", "p2", "p3"])).unwrap();
        let scores = Scores::Difficulty(vec![1.5, 3.5, 2.0]);
        let policy = Policy::Difficulty { small: "s".into(), large: "l".into() };
        let (pt, d) = simulate(&policy, &scores, Some(2.5), &r).unwrap();
        assert_eq!(d.iter().map(|d| d.model_id.as_str()).collect::<Vec<_>>(), vec!["s", "l", "s"]);
        // p1 s correct (1.0), p2 l correct (6.0), p3 s wrong (1.5)
        assert_eq!(pt.accuracy, 2.0 / 3.0);
        assert_eq!(pt.mean_latency_s, (1.0 + 1.5 + 6.0) / 3.0);
        assert_eq!(pt.counts, IndexMap::from([("s".to_string(), 2), ("l".to_string(), 1)]));
        assert_eq!(pt.n_correct(), 2);
    }

    #[test]
    fn constant_policy_equals_baseline() {
        let (m, pool) = two_models();
        let eval = ids(&["p3", "p1", "p2"]);
        let r = Replay::new(&m, &pool, &eval).unwrap();
        for k in ["s", "l"] {
            let (pt, _) = simulate(&Policy::Constant { model_id: k.into() }, &Scores::None, None, &r).unwrap();
            let b = baseline_point(k, &eval, &m).unwrap();
            assert_eq!((pt.accuracy, pt.mean_latency_s, pt.n_problems), (b.accuracy, b.mean_latency_s, b.n_problems));
            assert_eq!(pt, r.baseline(k).unwrap());
        }
        let b = baseline_point("l", &eval, &m).unwrap();
        assert_eq!(b.accuracy, 2.0 / 3.0);
        assert_eq!(b.mean_latency_s, 5.0);
    }

    #[test]
    fn oracle_hits_union() {
        let (m, pool) = two_models();
        let r = Replay::new(&m, &pool, &ids(&["p1", "p2", "p3"])).unwrap();
        let (pt, d) = simulate(&Policy::Oracle, &Scores::None, None, &r).unwrap();
        assert_eq!(pt.accuracy, r.union_accuracy());
        assert_eq!(d[2].model_id, "s");
    }

    #[test]
    fn coverage_failure_lists_missing() {
        let (m, pool) = two_models();
        match Replay::new(&m, &pool, &ids(&["p1", "p9"])) {
            Err(EvalError::Data(DataError::MissingCells { count, first })) => {
                assert_eq!(count, 2);
                assert_eq!(first[0], ("p9".to_string(), "s".to_string()));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn sweep_rejects_unsorted_and_wrong_scores() {
        let (m, pool) = two_models();
        let r = Replay::new(&m, &pool, &ids(&["p1", "p2"])).unwrap();
        let s = Scores::Correctness(vec![vec![0.2, 0.9], vec![0.6, 0.1]]);
        assert!(matches!(threshold_sweep(&Policy::Cascade, &s, &[0.5, 0.4], &r), Err(EvalError::UnsortedThresholds)));
        assert_eq!(threshold_sweep(&Policy::Cascade, &s, &[0.1, 0.5, 0.95], &r).unwrap().len(), 3);
        assert!(matches!(
            simulate(&Policy::Cascade, &Scores::Difficulty(vec![1.0, 2.0]), Some(0.5), &r),
            Err(EvalError::WrongScores { .. })
        ));
    }

    #[test]
    fn grids() {
        assert_eq!(parse_grid("2.1:2.9:0.1").unwrap(), default_difficulty_grid());
        assert_eq!(default_difficulty_grid().len(), 9);
        assert_eq!(default_difficulty_grid()[1], 2.2);
        assert_eq!(parse_grid("0.05:0.9:0.05").unwrap(), default_cascade_grid());
        assert_eq!(parse_grid("0:1:1").unwrap(), vec![0.0, 1.0]);
        assert!(parse_grid("1:0:0.1").is_err());
        assert_eq!(parse_grid("0.05:0.9").unwrap().len(), 86);
        assert_eq!(parse_grid("0:1").unwrap(), vec![0.0, 1.0]);
        assert_eq!(parse_grid("0.3, 0.7").unwrap(), vec![0.3, 0.7]);
        assert!(parse_grid("0:1:2:3").is_err());
        assert!(parse_grid("x").is_err());
        assert!(parse_grid("0:1:0").is_err());
    }
}
