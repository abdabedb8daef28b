use serde::{Deserialize, Serialize};

use super::{EvalError, Replay, Result, SystemPoint};
use crate::router::{route_random, RouterError};
use crate::seed;

/// Expected performance of sending each problem to `b` with probability λ
/// and to `a` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineSegment {
    pub a: SystemPoint,
    pub b: SystemPoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SegmentPoint {
    pub lambda: f64,
    pub accuracy: f64,
    pub mean_latency_s: f64,
}

fn lerp(x: f64, y: f64, t: f64) -> f64 {
    // exact at t = 0 and t = 1
    (1.0 - t) * x + t * y
}

impl BaselineSegment {
    pub fn new(a: SystemPoint, b: SystemPoint) -> Self {
        Self { a, b }
    }

    pub fn at(&self, lambda: f64) -> SegmentPoint {
        SegmentPoint {
            lambda,
            accuracy: lerp(self.a.accuracy, self.b.accuracy, lambda),
            mean_latency_s: lerp(self.a.mean_latency_s, self.b.mean_latency_s, lambda),
        }
    }

    /// Segment accuracy at the given latency and whether the latency lies
    /// outside the span (then the nearer endpoint is used).
    pub fn accuracy_at_latency(&self, latency: f64) -> (f64, bool) {
        let (la, lb) = (self.a.mean_latency_s, self.b.mean_latency_s);
        let (lo, hi) = if la <= lb { (la, lb) } else { (lb, la) };
        if latency < lo || latency > hi {
            let near_a = (latency - la).abs() <= (latency - lb).abs();
            return (if near_a { self.a.accuracy } else { self.b.accuracy }, true);
        }
        if la == lb {
            // every mixture costs the same; the best one is the reference
            return (self.a.accuracy.max(self.b.accuracy), false);
        }
        if latency == la {
            return (self.a.accuracy, false);
        }
        if latency == lb {
            return (self.b.accuracy, false);
        }
        let t = (latency - la) / (lb - la);
        (lerp(self.a.accuracy, self.b.accuracy, t), false)
    }
}

pub fn random_segment(a: &SystemPoint, b: &SystemPoint, lambdas: &[f64]) -> Result<(BaselineSegment, Vec<SegmentPoint>)> {
    if let Some(&l) = lambdas.iter().find(|l| !(0.0..=1.0).contains(*l)) {
        return Err(RouterError::LambdaOutOfRange(l).into());
    }
    let seg = BaselineSegment::new(a.clone(), b.clone());
    let pts = lambdas.iter().map(|&l| seg.at(l)).collect();
    Ok((seg, pts))
}

/// One seeded realisation of random assignment between two pool models.
pub fn random_assignment(replay: &Replay, small: &str, large: &str, lambda: f64, seed: u64) -> Result<SystemPoint> {
    let pool = replay.pool();
    let s = pool.get(small).ok_or_else(|| RouterError::UnknownModel(small.to_string()))?;
    let l = pool.get(large).ok_or_else(|| RouterError::UnknownModel(large.to_string()))?;
    let mut rng = seed::rng(seed);
    let decisions = replay
        .ids()
        .iter()
        .map(|id| route_random(id, lambda, s, l, &mut rng))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    replay.replay(&decisions, format!("random@{lambda}"), Some(lambda))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub lambda: f64,
    pub draws: usize,
    pub mean_accuracy: f64,
    pub mean_latency_s: f64,
    /// Standard deviation of a single realisation's accuracy.
    pub sd_accuracy: f64,
    pub sd_latency_s: f64,
}

/// `draws` independent realisations; realisation `k` uses
/// `derive(sub_seed(seed, RandomBaseline), k)`.
pub fn monte_carlo_segment(replay: &Replay, small: &str, large: &str, lambda: f64, draws: usize, seed: u64) -> Result<MonteCarloSummary> {
    if draws == 0 {
        return Err(EvalError::Report("Monte Carlo needs at least one draw".into()));
    }
    let root = seed::sub_seed(seed, seed::Stream::RandomBaseline);
    let mut acc = Vec::with_capacity(draws);
    let mut lat = Vec::with_capacity(draws);
    for k in 0..draws {
        let p = random_assignment(replay, small, large, lambda, seed::derive(root, k as u64))?;
        acc.push(p.accuracy);
        lat.push(p.mean_latency_s);
    }
    let stats = |v: &[f64]| {
        let n = v.len() as f64;
        let mean = v.iter().sum::<f64>() / n;
        let var = if v.len() > 1 { v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0) } else { 0.0 };
        (mean, var.sqrt())
    };
    let (ma, sa) = stats(&acc);
    let (ml, sl) = stats(&lat);
    Ok(MonteCarloSummary { lambda, draws, mean_accuracy: ma, mean_latency_s: ml, sd_accuracy: sa, sd_latency_s: sl })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DominanceRow {
    pub label: String,
    pub threshold: Option<f64>,
    pub accuracy: f64,
    pub mean_latency_s: f64,
    pub segment_accuracy: f64,
    /// `accuracy − segment_accuracy`.
    pub margin: f64,
    pub extrapolated: bool,
    pub below: bool,
}

/// Each point against the segment at equal latency.
pub fn dominance_report(points: &[SystemPoint], segment: &BaselineSegment) -> Vec<DominanceRow> {
    points
        .iter()
        .map(|p| {
            let (seg, extrapolated) = segment.accuracy_at_latency(p.mean_latency_s);
            let margin = p.accuracy - seg;
            DominanceRow {
                label: p.label.clone(),
                threshold: p.threshold,
                accuracy: p.accuracy,
                mean_latency_s: p.mean_latency_s,
                segment_accuracy: seg,
                margin,
                extrapolated,
                below: margin < 0.0,
            }
        })
        .collect()
}
