use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::{io_err, DataError, Result};
use crate::seed::{self, Stream};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum SplitSizes {
    Counts { train: usize, val: usize, eval: usize },
    Fractions { train: f64, val: f64, eval: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSpec {
    pub seed: u64,
    pub sizes: SplitSizes,
    #[serde(default)]
    pub stratify: bool,
}

impl SplitSpec {
    pub fn counts(seed: u64, train: usize, val: usize, eval: usize) -> Self {
        Self { seed, sizes: SplitSizes::Counts { train, val, eval }, stratify: false }
    }

    pub fn fractions(seed: u64, train: f64, val: f64, eval: f64) -> Self {
        Self { seed, sizes: SplitSizes::Fractions { train, val, eval }, stratify: false }
    }

    /// Exact partition sizes for a population of `n`.
    pub fn resolve(&self, n: usize) -> Result<[usize; 3]> {
        match self.sizes {
            SplitSizes::Counts { train, val, eval } => {
                let requested = train + val + eval;
                if requested > n {
                    return Err(DataError::SplitOverflow { requested, available: n });
                }
                Ok([train, val, eval])
            }
            SplitSizes::Fractions { train, val, eval } => {
                let fr = [train, val, eval];
                if fr.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
                    return Err(DataError::InvalidSplit(format!("fractions must be non-negative, got {fr:?}")));
                }
                let total: f64 = fr.iter().sum();
                if total > 1.0 + 1e-9 {
                    return Err(DataError::InvalidSplit(format!("fractions sum to {total} > 1")));
                }
                // cut points on the cumulative fractions keep a full split covering
                let mut cum = 0.0;
                let mut prev = 0usize;
                let mut out = [0usize; 3];
                for (o, f) in out.iter_mut().zip(fr) {
                    cum += f;
                    let cut = ((cum.min(1.0)) * n as f64).round() as usize;
                    *o = cut.saturating_sub(prev);
                    prev = prev.max(cut);
                }
                Ok(out)
            }
        }
    }
}

/// Materialized train / validation / evaluation id lists.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub seed: u64,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub eval: Vec<String>,
}

fn check_unique(ids: &[String]) -> Result<()> {
    let mut seen = HashSet::with_capacity(ids.len());
    for id in ids {
        if !seen.insert(id.as_str()) {
            return Err(DataError::InvalidSplit(format!("duplicate id {id:?}")));
        }
    }
    Ok(())
}

fn cut(order: Vec<String>, sizes: [usize; 3], seed: u64) -> Split {
    let mut it = order.into_iter();
    let train = it.by_ref().take(sizes[0]).collect();
    let val = it.by_ref().take(sizes[1]).collect();
    let eval = it.take(sizes[2]).collect();
    Split { seed, train, val, eval }
}

/// Seeded shuffle, then consecutive cuts.
pub fn split(ids: &[String], spec: &SplitSpec) -> Result<Split> {
    check_unique(ids)?;
    let sizes = spec.resolve(ids.len())?;
    let mut order = ids.to_vec();
    order.shuffle(&mut seed::rng(seed::sub_seed(spec.seed, Stream::Split)));
    Ok(cut(order, sizes, spec.seed))
}

/// Like [`split`], but each stratum (one key per id) is spread evenly over
/// the shuffled order before cutting, so partitions keep stratum proportions
/// up to rounding.
pub fn split_stratified(ids: &[String], keys: &[String], spec: &SplitSpec) -> Result<Split> {
    check_unique(ids)?;
    if keys.len() != ids.len() {
        return Err(DataError::InvalidSplit(format!("{} strata keys for {} ids", keys.len(), ids.len())));
    }
    let sizes = spec.resolve(ids.len())?;
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut group_of: HashMap<&str, usize> = HashMap::new();
    for (id, key) in ids.iter().zip(keys) {
        let g = *group_of.entry(key.as_str()).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(id.clone());
    }
    let mut rng = seed::rng(seed::sub_seed(spec.seed, Stream::Split));
    let mut placed: Vec<(f64, usize, String)> = Vec::with_capacity(ids.len());
    for (g, mut members) in groups.into_iter().enumerate() {
        members.shuffle(&mut rng);
        let n = members.len() as f64;
        for (j, id) in members.into_iter().enumerate() {
            placed.push(((j as f64 + 0.5) / n, g, id));
        }
    }
    placed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    Ok(cut(placed.into_iter().map(|(_, _, id)| id).collect(), sizes, spec.seed))
}

pub fn write_split(path: impl AsRef<Path>, split: &Split) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    serde_json::to_writer_pretty(&mut w, split)?;
    w.write_all(b"\n").map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

pub fn read_split(path: impl AsRef<Path>) -> Result<Split> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    Ok(serde_json::from_reader(BufReader::new(file))?)
}
