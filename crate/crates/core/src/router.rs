//! Routing policies over a cost-ordered model pool.
//!
//! Both threshold policies use a strict `>`: a difficulty score equal to the
//! threshold stays on the small model, and a correctness probability equal
//! to the threshold does not qualify. When no model clears the cascade
//! threshold the most expensive model is used.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::OutcomeMatrix;

#[derive(Debug, Error)]
pub enum RouterError {
    #[error("model pool is empty")]
    EmptyPool,
    #[error("cost_rank {0} appears more than once in the pool")]
    DuplicateRank(u32),
    #[error("model {0:?} appears more than once in the pool")]
    DuplicateModel(String),
    #[error("model {0:?} is not in the outcome matrix")]
    UnknownModel(String),
    #[error("small model {small:?} must be cheaper than large model {large:?}")]
    BadOrder { small: String, large: String },
    #[error("non-finite routing score {0}")]
    NonFiniteScore(f64),
    #[error("{actual} probabilities for a pool of {expected} models")]
    Misaligned { expected: usize, actual: usize },
    #[error("threshold {0} outside [0, 1]")]
    ThresholdOutOfRange(f64),
    #[error("lambda {0} outside [0, 1]")]
    LambdaOutOfRange(f64),
    #[error("no recorded outcome for problem {problem:?}, model {model:?}")]
    MaskedCell { problem: String, model: String },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, RouterError>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelProfile {
    pub model_id: String,
    /// 0 is cheapest.
    pub cost_rank: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub display_name: Option<String>,
}

impl ModelProfile {
    pub fn new(model_id: impl Into<String>, cost_rank: u32) -> Self {
        Self { model_id: model_id.into(), cost_rank, display_name: None }
    }
}

/// Non-empty, sorted ascending by `cost_rank`, ranks and ids unique.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct ModelPool {
    profiles: Vec<ModelProfile>,
}

impl<'de> Deserialize<'de> for ModelPool {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let profiles = Vec::<ModelProfile>::deserialize(d)?;
        ModelPool::new(profiles).map_err(serde::de::Error::custom)
    }
}

impl ModelPool {
    pub fn new(mut profiles: Vec<ModelProfile>) -> Result<Self> {
        if profiles.is_empty() {
            return Err(RouterError::EmptyPool);
        }
        profiles.sort_by_key(|p| p.cost_rank);
        for w in profiles.windows(2) {
            if w[0].cost_rank == w[1].cost_rank {
                return Err(RouterError::DuplicateRank(w[0].cost_rank));
            }
        }
        let mut ids = HashSet::new();
        for p in &profiles {
            if !ids.insert(p.model_id.as_str()) {
                return Err(RouterError::DuplicateModel(p.model_id.clone()));
            }
        }
        Ok(Self { profiles })
    }

    /// Ranks by ascending mean recorded latency; equal latencies keep the
    /// order of `model_ids`.
    pub fn from_latency(outcomes: &OutcomeMatrix, model_ids: &[String]) -> Result<Self> {
        let mut lat = Vec::with_capacity(model_ids.len());
        for (i, m) in model_ids.iter().enumerate() {
            let l = outcomes.mean_latency(m).ok_or_else(|| RouterError::UnknownModel(m.clone()))?;
            lat.push((l, i, m));
        }
        lat.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Self::new(lat.into_iter().enumerate().map(|(rank, (_, _, m))| ModelProfile::new(m.clone(), rank as u32)).collect())
    }

    pub fn profiles(&self) -> &[ModelProfile] {
        &self.profiles
    }

    pub fn len(&self) -> usize {
        self.profiles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.profiles.is_empty()
    }

    pub fn model_ids(&self) -> Vec<String> {
        self.profiles.iter().map(|p| p.model_id.clone()).collect()
    }

    pub fn cheapest(&self) -> &ModelProfile {
        &self.profiles[0]
    }

    pub fn largest(&self) -> &ModelProfile {
        self.profiles.last().expect("pool is non-empty")
    }

    pub fn position(&self, model_id: &str) -> Option<usize> {
        self.profiles.iter().position(|p| p.model_id == model_id)
    }

    pub fn get(&self, model_id: &str) -> Option<&ModelProfile> {
        self.profiles.iter().find(|p| p.model_id == model_id)
    }

    /// Pool restricted to the given ids, ranks kept.
    pub fn subset(&self, model_ids: &[String]) -> Result<Self> {
        let picked = model_ids
            .iter()
            .map(|m| self.get(m).cloned().ok_or_else(|| RouterError::UnknownModel(m.clone())))
            .collect::<Result<Vec<_>>>()?;
        Self::new(picked)
    }

    /// Every pool model must appear in the outcome matrix.
    pub fn check_against(&self, outcomes: &OutcomeMatrix) -> Result<()> {
        match self.profiles.iter().find(|p| outcomes.model_index(&p.model_id).is_none()) {
            Some(p) => Err(RouterError::UnknownModel(p.model_id.clone())),
            None => Ok(()),
        }
    }
}

pub fn read_pool(path: impl AsRef<Path>) -> Result<ModelPool> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| RouterError::Io { path: path.to_path_buf(), source })?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}

pub fn write_pool(path: impl AsRef<Path>, pool: &ModelPool) -> Result<()> {
    let path = path.as_ref();
    let io = |source| RouterError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, pool)?;
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyTag {
    Difficulty,
    Cascade,
    Random,
    Oracle,
    Baseline,
}

impl PolicyTag {
    pub fn as_str(self) -> &'static str {
        match self {
            PolicyTag::Difficulty => "difficulty",
            PolicyTag::Cascade => "cascade",
            PolicyTag::Random => "random",
            PolicyTag::Oracle => "oracle",
            PolicyTag::Baseline => "baseline",
        }
    }
}

impl fmt::Display for PolicyTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PolicyTag {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        Ok(match s {
            "difficulty" => PolicyTag::Difficulty,
            "cascade" => PolicyTag::Cascade,
            "random" => PolicyTag::Random,
            "oracle" => PolicyTag::Oracle,
            "baseline" => PolicyTag::Baseline,
            other => return Err(format!("unknown policy {other:?}")),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub problem_id: String,
    pub model_id: String,
    pub cost_rank: u32,
    pub policy: PolicyTag,
    /// Difficulty score, per-model probabilities, outcome bits, or the λ draw.
    pub scores: Vec<f64>,
    pub threshold: Option<f64>,
}

fn decision(problem_id: &str, m: &ModelProfile, policy: PolicyTag, scores: Vec<f64>, threshold: Option<f64>) -> RoutingDecision {
    RoutingDecision {
        problem_id: problem_id.to_string(),
        model_id: m.model_id.clone(),
        cost_rank: m.cost_rank,
        policy,
        scores,
        threshold,
    }
}

/// Large model iff `score > threshold`.
pub fn route_difficulty(
    problem_id: &str,
    score: f64,
    threshold: f64,
    small: &ModelProfile,
    large: &ModelProfile,
) -> Result<RoutingDecision> {
    if small.cost_rank >= large.cost_rank {
        return Err(RouterError::BadOrder { small: small.model_id.clone(), large: large.model_id.clone() });
    }
    if !score.is_finite() {
        return Err(RouterError::NonFiniteScore(score));
    }
    if threshold.is_nan() {
        return Err(RouterError::NonFiniteScore(threshold));
    }
    let chosen = if score > threshold { large } else { small };
    Ok(decision(problem_id, chosen, PolicyTag::Difficulty, vec![score], Some(threshold)))
}

/// Cheapest model with `p > threshold`, else the most expensive.
/// `probs` follows pool order.
pub fn route_cascade(problem_id: &str, probs: &[f64], threshold: f64, pool: &ModelPool) -> Result<RoutingDecision> {
    if probs.len() != pool.len() {
        return Err(RouterError::Misaligned { expected: pool.len(), actual: probs.len() });
    }
    if !(0.0..=1.0).contains(&threshold) {
        return Err(RouterError::ThresholdOutOfRange(threshold));
    }
    if let Some(&p) = probs.iter().find(|p| !p.is_finite()) {
        return Err(RouterError::NonFiniteScore(p));
    }
    let chosen = probs.iter().position(|&p| p > threshold).map_or(pool.largest(), |i| &pool.profiles[i]);
    Ok(decision(problem_id, chosen, PolicyTag::Cascade, probs.to_vec(), Some(threshold)))
}

/// Large with probability `lambda`.
pub fn route_random<R: Rng + ?Sized>(
    problem_id: &str,
    lambda: f64,
    small: &ModelProfile,
    large: &ModelProfile,
    rng: &mut R,
) -> Result<RoutingDecision> {
    if !(0.0..=1.0).contains(&lambda) {
        return Err(RouterError::LambdaOutOfRange(lambda));
    }
    let u: f64 = rng.random();
    let chosen = if u < lambda { large } else { small };
    Ok(decision(problem_id, chosen, PolicyTag::Random, vec![u], Some(lambda)))
}

/// Cheapest model recorded correct, else the cheapest model. `row` follows
/// pool order; `None` marks a missing cell.
pub fn route_oracle(problem_id: &str, row: &[Option<bool>], pool: &ModelPool) -> Result<RoutingDecision> {
    if row.len() != pool.len() {
        return Err(RouterError::Misaligned { expected: pool.len(), actual: row.len() });
    }
    if let Some(i) = row.iter().position(Option::is_none) {
        return Err(RouterError::MaskedCell { problem: problem_id.to_string(), model: pool.profiles[i].model_id.clone() });
    }
    let chosen = row.iter().position(|c| *c == Some(true)).map_or(pool.cheapest(), |i| &pool.profiles[i]);
    let scores = row.iter().map(|c| if *c == Some(true) { 1.0 } else { 0.0 }).collect();
    Ok(decision(problem_id, chosen, PolicyTag::Oracle, scores, None))
}

/// Oracle row for one problem, in pool order.
pub fn outcome_row(outcomes: &OutcomeMatrix, problem_id: &str, pool: &ModelPool) -> Vec<Option<bool>> {
    pool.profiles.iter().map(|p| outcomes.get(problem_id, &p.model_id).map(|o| o.correct)).collect()
}

/// `problem_id,policy,threshold,chosen_model,score`; several scores are
/// joined with `;`, an absent threshold is left empty.
pub fn write_decisions_csv<W: Write>(out: W, decisions: &[RoutingDecision]) -> Result<W> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["problem_id", "policy", "threshold", "chosen_model", "score"])?;
    for d in decisions {
        let threshold = d.threshold.map(|t| t.to_string()).unwrap_or_default();
        let score = d.scores.iter().map(f64::to_string).collect::<Vec<_>>().join(";");
        w.write_record([d.problem_id.as_str(), d.policy.as_str(), &threshold, &d.model_id, &score])?;
    }
    w.into_inner().map_err(|e| RouterError::Io { path: PathBuf::from("<decisions>"), source: e.into_error() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;

    fn pool(n: usize) -> ModelPool {
        ModelPool::new((0..n).map(|i| ModelProfile::new(format!("m{i}"), i as u32)).collect()).unwrap()
    }

    #[test]
    fn difficulty_examples() {
        let (s, l) = (ModelProfile::new("s", 0), ModelProfile::new("l", 1));
        assert_eq!(route_difficulty("p", 3.0, 2.5, &s, &l).unwrap().model_id, "l");
        assert_eq!(route_difficulty("p", 2.5, 2.5, &s, &l).unwrap().model_id, "s");
        for score in [1.0, 2.2, 4.9, 5.0] {
            assert_eq!(route_difficulty("p", score, 5.0, &s, &l).unwrap().model_id, "s");
            assert_eq!(route_difficulty("p", score, 0.9, &s, &l).unwrap().model_id, "l");
        }
        assert!(route_difficulty("p", f64::NAN, 2.5, &s, &l).is_err());
        assert!(route_difficulty("p", 3.0, 2.5, &l, &s).is_err());
    }

    #[test]
    fn cascade_examples() {
        let p = pool(3);
        assert_eq!(route_cascade("p", &[0.9, 0.9, 0.9], 0.5, &p).unwrap().model_id, "m0");
        assert_eq!(route_cascade("p", &[0.1, 0.2, 0.3], 0.5, &p).unwrap().model_id, "m2");
        assert_eq!(route_cascade("p", &[0.3, 0.7, 0.9], 0.5, &p).unwrap().model_id, "m1");
        assert_eq!(route_cascade("p", &[0.5, 0.5, 0.5], 0.5, &p).unwrap().model_id, "m2");
        assert!(matches!(route_cascade("p", &[0.5, 0.5], 0.5, &p), Err(RouterError::Misaligned { .. })));
        assert!(route_cascade("p", &[0.5, 0.5, 0.5], 1.5, &p).is_err());
    }

    #[test]
    fn cascade_matches_hand_enumeration_over_positions() {
        let p = pool(3);
        // the first position strictly above 0.5 wins; none → last
        for mask in 0u32..8 {
            let probs: Vec<f64> = (0..3).map(|i| if mask >> i & 1 == 1 { 0.8 } else { 0.2 }).collect();
            let expected = if mask & 1 == 1 { 0 } else if mask & 2 == 2 { 1 } else { 2 };
            assert_eq!(route_cascade("p", &probs, 0.5, &p).unwrap().cost_rank, expected, "mask {mask:03b}");
        }
    }

    #[test]
    fn random_endpoints_and_rate() {
        let (s, l) = (ModelProfile::new("s", 0), ModelProfile::new("l", 1));
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            assert_eq!(route_random("p", 0.0, &s, &l, &mut rng).unwrap().model_id, "s");
            assert_eq!(route_random("p", 1.0, &s, &l, &mut rng).unwrap().model_id, "l");
        }
        let large = (0..10_000).filter(|_| route_random("p", 0.5, &s, &l, &mut rng).unwrap().model_id == "l").count();
        assert!((large as f64 / 10_000.0 - 0.5).abs() <= 0.02, "{large}");
        assert!(route_random("p", 1.1, &s, &l, &mut rng).is_err());
    }

    #[test]
    fn oracle_examples() {
        let p = pool(3);
        assert_eq!(route_oracle("q", &[Some(false), Some(true), Some(true)], &p).unwrap().model_id, "m1");
        assert_eq!(route_oracle("q", &[Some(false); 3], &p).unwrap().model_id, "m0");
        assert!(matches!(route_oracle("q", &[Some(false), None, Some(true)], &p), Err(RouterError::MaskedCell { .. })));
    }

    #[test]
    fn pool_validation_and_order() {
        let p = ModelPool::new(vec![ModelProfile::new("b", 5), ModelProfile::new("a", 2)]).unwrap();
        assert_eq!(p.model_ids(), vec!["a", "b"]);
        assert!(matches!(ModelPool::new(vec![]), Err(RouterError::EmptyPool)));
        assert!(matches!(
            ModelPool::new(vec![ModelProfile::new("a", 1), ModelProfile::new("b", 1)]),
            Err(RouterError::DuplicateRank(1))
        ));
        assert!(ModelPool::new(vec![ModelProfile::new("a", 1), ModelProfile::new("a", 2)]).is_err());
        let parsed: ModelPool =
            serde_json::from_str(r#"[{"model_id":"x","cost_rank":1},{"model_id":"y","cost_rank":0}]"#).unwrap();
        assert_eq!(parsed.model_ids(), vec!["y", "x"]);
        assert!(serde_json::from_str::<ModelPool>(r#"[{"model_id":"x","cost_rank":1,"speed":3}]"#).is_err());
    }

    #[test]
    fn decisions_csv_layout() {
        let p = pool(2);
        let d = vec![
            route_cascade("p1", &[0.25, 0.75], 0.5, &p).unwrap(),
            route_oracle("p2", &[Some(true), Some(false)], &p).unwrap(),
        ];
        let text = String::from_utf8(write_decisions_csv(Vec::new(), &d).unwrap()).unwrap();
        assert_eq!(
            text,
            "problem_id,policy,threshold,chosen_model,score\np1,cascade,0.5,m1,0.25;0.75\np2,oracle,,m0,1;0\n"
        );
    }

    proptest! {
        #[test]
        fn cascade_rank_monotone_in_threshold(
            probs in proptest::collection::vec(0.0f64..=1.0, 1..6),
            mut thetas in proptest::collection::vec(0.0f64..=1.0, 2..12),
        ) {
            let p = pool(probs.len());
            thetas.sort_by(f64::total_cmp);
            let ranks: Vec<u32> = thetas.iter().map(|&t| route_cascade("p", &probs, t, &p).unwrap().cost_rank).collect();
            prop_assert!(ranks.windows(2).all(|w| w[0] <= w[1]), "{:?}", ranks);
        }

        #[test]
        fn difficulty_never_moves_to_large_when_threshold_rises(score in 1.0f64..5.0, a in 0.0f64..6.0, b in 0.0f64..6.0) {
            let (s, l) = (ModelProfile::new("s", 0), ModelProfile::new("l", 1));
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            let r_lo = route_difficulty("p", score, lo, &s, &l).unwrap().cost_rank;
            let r_hi = route_difficulty("p", score, hi, &s, &l).unwrap().cost_rank;
            prop_assert!(r_hi <= r_lo);
        }

        /// Exhaustive over all deterministic policies: none beats the oracle
        /// on accuracy, and those that tie never use less total rank.
        #[test]
        fn oracle_dominates_every_policy(m in 1usize..=3, n in 1usize..=5, bits in any::<u32>()) {
            let p = pool(m);
            let cell = |i: usize, k: usize| bits >> ((i * m + k) % 32) & 1 == 1;
            let mut oracle_hits = 0;
            let mut oracle_rank = 0;
            for i in 0..n {
                let row: Vec<Option<bool>> = (0..m).map(|k| Some(cell(i, k))).collect();
                let d = route_oracle("p", &row, &p).unwrap();
                oracle_hits += usize::from(cell(i, d.cost_rank as usize));
                oracle_rank += d.cost_rank;
            }
            for code in 0..m.pow(n as u32) {
                let (mut hits, mut rank, mut c) = (0, 0, code);
                for i in 0..n {
                    let k = c % m;
                    c /= m;
                    hits += usize::from(cell(i, k));
                    rank += k as u32;
                }
                prop_assert!(hits <= oracle_hits);
                if hits == oracle_hits {
                    prop_assert!(rank >= oracle_rank);
                }
            }
        }
    }
}
