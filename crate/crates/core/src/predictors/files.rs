//! On-disk predictors: one checkpoint per network plus a JSON sidecar
//! holding provenance, config, the model list, and training history.
//!
//! `write_*_predictor(base)` produces `{base}.json` and `{base}.rfmlp`, or
//! `{base}.head{k}.rfmlp` per model for separately trained networks.
//! Checkpoint names in the sidecar are relative to its directory.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::correctness::{CorrectnessNet, CorrectnessPredictor};
use super::difficulty::{DifficultyPredictor, DIFFICULTY_CLASSES};
use super::{CorrectnessConfig, DifficultyConfig, PredictorError, Result, TrainRun};
use crate::tensor::{read_checkpoint, write_checkpoint, Mlp};

pub const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "config")]
pub enum PredictorConfig {
    Difficulty(DifficultyConfig),
    Correctness(CorrectnessConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub version: u32,
    pub embedder_id: String,
    pub layer_index: u32,
    /// Correctness output order; empty for difficulty predictors.
    pub model_ids: Vec<String>,
    pub predictor: PredictorConfig,
    pub checkpoints: Vec<String>,
    pub history: Vec<TrainRun>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Predictor {
    Difficulty(DifficultyPredictor),
    Correctness(CorrectnessPredictor),
}

fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(base.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

fn file_name(p: &Path) -> String {
    p.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default()
}

fn write_sidecar(path: &Path, sidecar: &Sidecar) -> Result<()> {
    let io = |source| PredictorError::Io { path: path.to_path_buf(), source };
    let mut w = BufWriter::new(File::create(path).map_err(io)?);
    serde_json::to_writer_pretty(&mut w, sidecar)?;
    w.write_all(b"\n").map_err(io)?;
    w.flush().map_err(io)
}

/// Returns the sidecar path.
pub fn write_difficulty_predictor(base: impl AsRef<Path>, pred: &DifficultyPredictor) -> Result<PathBuf> {
    let base = base.as_ref();
    let ckpt = with_suffix(base, ".rfmlp");
    write_checkpoint(&pred.mlp, &ckpt)?;
    let sidecar = Sidecar {
        version: SIDECAR_VERSION,
        embedder_id: pred.embedder_id.clone(),
        layer_index: pred.layer_index,
        model_ids: Vec::new(),
        predictor: PredictorConfig::Difficulty(pred.config.clone()),
        checkpoints: vec![file_name(&ckpt)],
        history: pred.run.iter().cloned().collect(),
    };
    let path = with_suffix(base, ".json");
    write_sidecar(&path, &sidecar)?;
    Ok(path)
}

/// Returns the sidecar path.
pub fn write_correctness_predictor(base: impl AsRef<Path>, pred: &CorrectnessPredictor) -> Result<PathBuf> {
    let base = base.as_ref();
    let mut checkpoints = Vec::new();
    match &pred.net {
        CorrectnessNet::Shared(m) => {
            let ckpt = with_suffix(base, ".rfmlp");
            write_checkpoint(m, &ckpt)?;
            checkpoints.push(file_name(&ckpt));
        }
        CorrectnessNet::PerModel(ms) => {
            for (k, m) in ms.iter().enumerate() {
                let ckpt = with_suffix(base, &format!(".head{k}.rfmlp"));
                write_checkpoint(m, &ckpt)?;
                checkpoints.push(file_name(&ckpt));
            }
        }
    }
    let sidecar = Sidecar {
        version: SIDECAR_VERSION,
        embedder_id: pred.embedder_id.clone(),
        layer_index: pred.layer_index,
        model_ids: pred.model_ids.clone(),
        predictor: PredictorConfig::Correctness(pred.config.clone()),
        checkpoints,
        history: pred.runs.clone(),
    };
    let path = with_suffix(base, ".json");
    write_sidecar(&path, &sidecar)?;
    Ok(path)
}

/// Loads a predictor from its sidecar, checking the checkpoints against the
/// declared shape.
pub fn read_predictor(sidecar_path: impl AsRef<Path>) -> Result<Predictor> {
    let path = sidecar_path.as_ref();
    let file = File::open(path).map_err(|source| PredictorError::Io { path: path.to_path_buf(), source })?;
    let sidecar: Sidecar = serde_json::from_reader(BufReader::new(file))?;
    if sidecar.version != SIDECAR_VERSION {
        return Err(PredictorError::Sidecar(format!("unsupported sidecar version {}", sidecar.version)));
    }
    let dir = path.parent().unwrap_or(Path::new(""));
    let nets: Vec<Mlp> =
        sidecar.checkpoints.iter().map(|c| read_checkpoint(dir.join(c))).collect::<std::result::Result<_, _>>()?;
    let bad = |m: String| Err(PredictorError::Sidecar(format!("{}: {m}", path.display())));
    match sidecar.predictor {
        PredictorConfig::Difficulty(config) => {
            let [mlp]: [Mlp; 1] = match nets.try_into() {
                Ok(a) => a,
                Err(v) => return bad(format!("difficulty predictor needs 1 checkpoint, found {}", v.len())),
            };
            if mlp.output_dim() != DIFFICULTY_CLASSES {
                return bad(format!("difficulty network has {} outputs", mlp.output_dim()));
            }
            Ok(Predictor::Difficulty(DifficultyPredictor {
                mlp,
                embedder_id: sidecar.embedder_id,
                layer_index: sidecar.layer_index,
                config,
                run: sidecar.history.into_iter().next(),
            }))
        }
        PredictorConfig::Correctness(config) => {
            let m = sidecar.model_ids.len();
            let net = if config.per_model_heads {
                if nets.len() != 1 || nets[0].output_dim() != m {
                    return bad(format!("expected one network with {m} outputs"));
                }
                CorrectnessNet::Shared(nets.into_iter().next().unwrap())
            } else {
                if nets.len() != m || nets.iter().any(|n| n.output_dim() != 1) {
                    return bad(format!("expected {m} single-output networks"));
                }
                if nets.iter().any(|n| n.input_dim() != nets[0].input_dim()) {
                    return bad("networks disagree on input dimension".into());
                }
                CorrectnessNet::PerModel(nets)
            };
            let mut seen = std::collections::HashSet::new();
            if m == 0 || !sidecar.model_ids.iter().all(|id| seen.insert(id.clone())) {
                return bad("model_ids must be non-empty and unique".into());
            }
            Ok(Predictor::Correctness(CorrectnessPredictor {
                net,
                model_ids: sidecar.model_ids,
                embedder_id: sidecar.embedder_id,
                layer_index: sidecar.layer_index,
                config,
                runs: sidecar.history,
            }))
        }
    }
}

/// `network,epoch,train_loss,val_loss,val_metric`, one row per epoch of each run.
pub fn write_history_csv(path: impl AsRef<Path>, runs: &[TrainRun]) -> Result<()> {
    let path = path.as_ref();
    let io = |source| PredictorError::Io { path: path.to_path_buf(), source };
    let csv_err = |e: csv::Error| PredictorError::Data(e.into());
    let mut w = csv::Writer::from_writer(BufWriter::new(File::create(path).map_err(io)?));
    w.write_record(["network", "epoch", "train_loss", "val_loss", "val_metric"]).map_err(csv_err)?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for (k, run) in runs.iter().enumerate() {
        for e in &run.history {
            w.write_record([
                k.to_string(),
                e.epoch.to_string(),
                e.train_loss.to_string(),
                opt(e.val_loss),
                opt(e.val_metric),
            ])
            .map_err(csv_err)?;
        }
    }
    w.into_inner().map_err(|e| io(e.into_error()))?.flush().map_err(io)
}
