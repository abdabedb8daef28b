//! Report bundle: one CSV per artifact plus `manifest.json` listing each
//! file with its size and CRC32.
//!
//! A prefix ending in `/` (or naming an existing directory) places files
//! inside that directory; any other prefix is prepended to the file names,
//! so `out/run1-` yields `out/run1-points.csv`.
//!
//! | file | columns |
//! |------|---------|
//! | `points.csv` | `label,threshold,accuracy,mean_latency_s,n,count_<model>…` |
//! | `segment.csv` | `segment,lambda,accuracy,mean_latency_s` |
//! | `dominance.csv` | `label,threshold,accuracy,mean_latency_s,segment_accuracy,margin,extrapolated,below` |
//! | `decisions.csv` | `problem_id,policy,threshold,chosen_model,score` |
//! | `advantage.csv` | `model_i,model_j,count_ij,count_ji,diff` |
//!
//! Floats are written in shortest round-trip form and empty cells mean
//! "absent", so re-emitting a loaded bundle reproduces it byte for byte.

use std::fs;
use std::path::{Path, PathBuf};

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use super::{AdvantageMatrix, DominanceRow, EvalError, Result, SegmentPoint, SystemPoint};
use crate::binfmt::crc32;
use crate::router::{write_decisions_csv, ModelPool, RoutingDecision};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Report {
    pub points: Vec<SystemPoint>,
    /// Named baseline segments.
    pub segments: Vec<(String, Vec<SegmentPoint>)>,
    pub dominance: Vec<DominanceRow>,
    pub decisions: Vec<RoutingDecision>,
    pub advantage: Option<AdvantageMatrix>,
    /// Needed to restore decision cost ranks on load.
    pub pool: Option<ModelPool>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileEntry {
    pub kind: String,
    pub name: String,
    pub bytes: u64,
    pub crc32: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub version: u32,
    pub files: Vec<FileEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pool: Option<ModelPool>,
}

/// Output path for `name` under `prefix`: a directory (existing, or written
/// with a trailing separator) gets `prefix/name`, anything else `prefix` + `name`.
pub fn prefixed_path(prefix: &Path, name: &str) -> PathBuf {
    let s = prefix.as_os_str().to_string_lossy();
    if s.is_empty() || s.ends_with('/') || s.ends_with(std::path::MAIN_SEPARATOR) || prefix.is_dir() {
        prefix.join(name)
    } else {
        PathBuf::from(format!("{s}{name}"))
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn into_bytes(w: csv::Writer<Vec<u8>>) -> Result<Vec<u8>> {
    w.into_inner().map_err(|e| EvalError::Report(e.to_string()))
}

fn points_csv(points: &[SystemPoint]) -> Result<Vec<u8>> {
    let mut models: Vec<&str> = Vec::new();
    for p in points {
        for m in p.counts.keys() {
            if !models.contains(&m.as_str()) {
                models.push(m);
            }
        }
    }
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header: Vec<String> = ["label", "threshold", "accuracy", "mean_latency_s", "n"].map(String::from).to_vec();
    header.extend(models.iter().map(|m| format!("count_{m}")));
    w.write_record(&header)?;
    for p in points {
        let mut rec = vec![p.label.clone(), opt(p.threshold), p.accuracy.to_string(), p.mean_latency_s.to_string(), p.n_problems.to_string()];
        rec.extend(models.iter().map(|m| p.counts.get(*m).map(|c| c.to_string()).unwrap_or_default()));
        w.write_record(&rec)?;
    }
    into_bytes(w)
}

fn segment_csv(segments: &[(String, Vec<SegmentPoint>)]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["segment", "lambda", "accuracy", "mean_latency_s"])?;
    for (name, pts) in segments {
        for p in pts {
            w.write_record([name.clone(), p.lambda.to_string(), p.accuracy.to_string(), p.mean_latency_s.to_string()])?;
        }
    }
    into_bytes(w)
}

fn dominance_csv(rows: &[DominanceRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["label", "threshold", "accuracy", "mean_latency_s", "segment_accuracy", "margin", "extrapolated", "below"])?;
    for r in rows {
        w.write_record([
            r.label.clone(),
            opt(r.threshold),
            r.accuracy.to_string(),
            r.mean_latency_s.to_string(),
            r.segment_accuracy.to_string(),
            r.margin.to_string(),
            r.extrapolated.to_string(),
            r.below.to_string(),
        ])?;
    }
    into_bytes(w)
}

fn advantage_csv(a: &AdvantageMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["model_i", "model_j", "count_ij", "count_ji", "diff"])?;
    for (i, mi) in a.models.iter().enumerate() {
        for (j, mj) in a.models.iter().enumerate() {
            w.write_record([
                mi.clone(),
                mj.clone(),
                a.counts[i][j].to_string(),
                a.counts[j][i].to_string(),
                a.difference(i, j).to_string(),
            ])?;
        }
    }
    into_bytes(w)
}

/// Writes the bundle and returns the manifest path.
pub fn emit_report(report: &Report, prefix: impl AsRef<Path>) -> Result<PathBuf> {
    let prefix = prefix.as_ref();
    let mut files: Vec<(&str, Vec<u8>)> = vec![("points", points_csv(&report.points)?)];
    if !report.segments.is_empty() {
        files.push(("segment", segment_csv(&report.segments)?));
    }
    if !report.dominance.is_empty() {
        files.push(("dominance", dominance_csv(&report.dominance)?));
    }
    if !report.decisions.is_empty() {
        if report.pool.is_none() {
            return Err(EvalError::Report("decisions need the model pool in the report".into()));
        }
        files.push(("decisions", write_decisions_csv(Vec::new(), &report.decisions)?));
    }
    if let Some(a) = &report.advantage {
        files.push(("advantage", advantage_csv(a)?));
    }

    let manifest_path = prefixed_path(prefix, "manifest.json");
    if let Some(dir) = manifest_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| EvalError::Io { path: dir.to_path_buf(), source })?;
    }
    let mut entries = Vec::with_capacity(files.len());
    for (kind, bytes) in files {
        let path = prefixed_path(prefix, &format!("{kind}.csv"));
        fs::write(&path, &bytes).map_err(|source| EvalError::Io { path: path.clone(), source })?;
        entries.push(FileEntry {
            kind: kind.to_string(),
            name: path.file_name().expect("file path").to_string_lossy().into_owned(),
            bytes: bytes.len() as u64,
            crc32: crc32(&bytes),
        });
    }
    let manifest = Manifest { version: MANIFEST_VERSION, files: entries, pool: report.pool.clone() };
    let mut text = serde_json::to_vec_pretty(&manifest)?;
    text.push(b'\n');
    fs::write(&manifest_path, text).map_err(|source| EvalError::Io { path: manifest_path.clone(), source })?;
    Ok(manifest_path)
}

fn bad(file: &str, msg: impl std::fmt::Display) -> EvalError {
    EvalError::Report(format!("{file}: {msg}"))
}

fn parse_f64(file: &str, s: &str) -> Result<f64> {
    s.parse().map_err(|_| bad(file, format!("bad number {s:?}")))
}

fn parse_opt(file: &str, s: &str) -> Result<Option<f64>> {
    if s.is_empty() { Ok(None) } else { parse_f64(file, s).map(Some) }
}

fn parse_usize(file: &str, s: &str) -> Result<usize> {
    s.parse().map_err(|_| bad(file, format!("bad count {s:?}")))
}

fn parse_bool(file: &str, s: &str) -> Result<bool> {
    s.parse().map_err(|_| bad(file, format!("bad flag {s:?}")))
}

fn reader(bytes: &[u8]) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new().has_headers(true).from_reader(bytes)
}

fn expect_header(file: &str, r: &mut csv::Reader<&[u8]>, want: &[&str]) -> Result<csv::StringRecord> {
    let h = r.headers()?.clone();
    if h.len() < want.len() || h.iter().zip(want).any(|(a, b)| a != *b) {
        return Err(bad(file, format!("unexpected header {:?}", h.iter().collect::<Vec<_>>())));
    }
    Ok(h)
}

fn parse_points(file: &str, bytes: &[u8]) -> Result<Vec<SystemPoint>> {
    let mut r = reader(bytes);
    let h = expect_header(file, &mut r, &["label", "threshold", "accuracy", "mean_latency_s", "n"])?;
    let models: Vec<String> = h
        .iter()
        .skip(5)
        .map(|c| c.strip_prefix("count_").map(String::from).ok_or_else(|| bad(file, format!("bad column {c:?}"))))
        .collect::<Result<_>>()?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let mut counts = IndexMap::new();
        for (m, cell) in models.iter().zip(rec.iter().skip(5)) {
            if !cell.is_empty() {
                counts.insert(m.clone(), parse_usize(file, cell)?);
            }
        }
        out.push(SystemPoint {
            label: rec[0].to_string(),
            threshold: parse_opt(file, &rec[1])?,
            accuracy: parse_f64(file, &rec[2])?,
            mean_latency_s: parse_f64(file, &rec[3])?,
            n_problems: parse_usize(file, &rec[4])?,
            counts,
        });
    }
    Ok(out)
}

fn parse_segments(file: &str, bytes: &[u8]) -> Result<Vec<(String, Vec<SegmentPoint>)>> {
    let mut r = reader(bytes);
    expect_header(file, &mut r, &["segment", "lambda", "accuracy", "mean_latency_s"])?;
    let mut out: Vec<(String, Vec<SegmentPoint>)> = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let p = SegmentPoint {
            lambda: parse_f64(file, &rec[1])?,
            accuracy: parse_f64(file, &rec[2])?,
            mean_latency_s: parse_f64(file, &rec[3])?,
        };
        match out.last_mut() {
            Some((name, pts)) if name == &rec[0] => pts.push(p),
            _ => out.push((rec[0].to_string(), vec![p])),
        }
    }
    Ok(out)
}

fn parse_dominance(file: &str, bytes: &[u8]) -> Result<Vec<DominanceRow>> {
    let mut r = reader(bytes);
    expect_header(
        file,
        &mut r,
        &["label", "threshold", "accuracy", "mean_latency_s", "segment_accuracy", "margin", "extrapolated", "below"],
    )?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            Ok(DominanceRow {
                label: rec[0].to_string(),
                threshold: parse_opt(file, &rec[1])?,
                accuracy: parse_f64(file, &rec[2])?,
                mean_latency_s: parse_f64(file, &rec[3])?,
                segment_accuracy: parse_f64(file, &rec[4])?,
                margin: parse_f64(file, &rec[5])?,
                extrapolated: parse_bool(file, &rec[6])?,
                below: parse_bool(file, &rec[7])?,
            })
        })
        .collect()
}

fn parse_decisions(file: &str, bytes: &[u8], pool: &ModelPool) -> Result<Vec<RoutingDecision>> {
    let mut r = reader(bytes);
    expect_header(file, &mut r, &["problem_id", "policy", "threshold", "chosen_model", "score"])?;
    r.records()
        .map(|rec| {
            let rec = rec?;
            let profile = pool.get(&rec[3]).ok_or_else(|| bad(file, format!("model {:?} not in pool", &rec[3])))?;
            let scores =
                if rec[4].is_empty() { Vec::new() } else { rec[4].split(';').map(|s| parse_f64(file, s)).collect::<Result<_>>()? };
            Ok(RoutingDecision {
                problem_id: rec[0].to_string(),
                model_id: profile.model_id.clone(),
                cost_rank: profile.cost_rank,
                policy: rec[1].parse().map_err(|e| bad(file, e))?,
                scores,
                threshold: parse_opt(file, &rec[2])?,
            })
        })
        .collect()
}

fn parse_advantage(file: &str, bytes: &[u8]) -> Result<AdvantageMatrix> {
    let mut r = reader(bytes);
    expect_header(file, &mut r, &["model_i", "model_j", "count_ij", "count_ji", "diff"])?;
    let mut models: Vec<String> = Vec::new();
    let mut cells = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        for m in [&rec[0], &rec[1]] {
            if !models.iter().any(|x| x == m) {
                models.push(m.to_string());
            }
        }
        cells.push((rec[0].to_string(), rec[1].to_string(), parse_usize(file, &rec[2])?));
    }
    let n = models.len();
    let mut counts = vec![vec![0; n]; n];
    let idx = |m: &str| models.iter().position(|x| x == m).expect("collected");
    for (i, j, c) in cells {
        counts[idx(&i)][idx(&j)] = c;
    }
    Ok(AdvantageMatrix { models, counts })
}

/// Loads a bundle, verifying each file's size and CRC32 first.
pub fn load_report(manifest_path: impl AsRef<Path>) -> Result<Report> {
    let manifest_path = manifest_path.as_ref();
    let text = fs::read(manifest_path).map_err(|source| EvalError::Io { path: manifest_path.to_path_buf(), source })?;
    let manifest: Manifest = serde_json::from_slice(&text)?;
    if manifest.version != MANIFEST_VERSION {
        return Err(EvalError::Report(format!("unsupported manifest version {}", manifest.version)));
    }
    let dir = manifest_path.parent().unwrap_or(Path::new(""));
    let mut report = Report { pool: manifest.pool.clone(), ..Report::default() };
    for entry in &manifest.files {
        let path = dir.join(&entry.name);
        let bytes = fs::read(&path).map_err(|source| EvalError::Io { path: path.clone(), source })?;
        let actual = crc32(&bytes);
        if actual != entry.crc32 || bytes.len() as u64 != entry.bytes {
            return Err(EvalError::Checksum { file: entry.name.clone(), expected: entry.crc32, actual });
        }
        let f = entry.name.as_str();
        match entry.kind.as_str() {
            "points" => report.points = parse_points(f, &bytes)?,
            "segment" => report.segments = parse_segments(f, &bytes)?,
            "dominance" => report.dominance = parse_dominance(f, &bytes)?,
            "decisions" => {
                let pool = manifest.pool.as_ref().ok_or_else(|| bad(f, "manifest has no pool"))?;
                report.decisions = parse_decisions(f, &bytes, pool)?;
            }
            "advantage" => report.advantage = Some(parse_advantage(f, &bytes)?),
            other => return Err(bad(f, format!("unknown kind {other:?}"))),
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::router::{route_cascade, ModelProfile};

    fn sample() -> Report {
        let pool = ModelPool::new(vec![ModelProfile::new("a", 0), ModelProfile::new("b,x", 1)]).unwrap();
        let points = vec![
            SystemPoint {
                label: "cascade".into(),
                threshold: Some(0.1 + 0.2),
                accuracy: 2.0 / 3.0,
                mean_latency_s: 1.0 / 7.0,
                n_problems: 3,
                counts: IndexMap::from([("a".into(), 2), ("b,x".into(), 1)]),
            },
            SystemPoint {
                label: "baseline:a".into(),
                threshold: None,
                accuracy: 1.0,
                mean_latency_s: 0.5,
                n_problems: 3,
                counts: IndexMap::from([("a".into(), 3)]),
            },
        ];
        let segments = vec![
            ("a|b,x".to_string(), vec![SegmentPoint { lambda: 0.0, accuracy: 0.5, mean_latency_s: 1.0 }]),
            ("other".to_string(), vec![SegmentPoint { lambda: 1.0, accuracy: 1e-300, mean_latency_s: 2.5 }]),
        ];
        let dominance = vec![DominanceRow {
            label: "cascade".into(),
            threshold: Some(0.3),
            accuracy: 0.7,
            mean_latency_s: 1.25,
            segment_accuracy: 0.6,
            margin: 0.7 - 0.6,
            extrapolated: false,
            below: false,
        }];
        let decisions = vec![route_cascade("p1", &[0.25, 0.875], 0.5, &pool).unwrap()];
        let advantage = Some(AdvantageMatrix { models: vec!["a".into(), "b,x".into()], counts: vec![vec![0, 4], vec![1, 0]] });
        Report { points, segments, dominance, decisions, advantage, pool: Some(pool) }
    }

    #[test]
    fn round_trip_and_byte_identical_reemit() {
        let dir = tempfile::tempdir().unwrap();
        let report = sample();
        let m1 = emit_report(&report, dir.path().join("r1-")).unwrap();
        let loaded = load_report(&m1).unwrap();
        assert_eq!(loaded, report);
        let m2 = emit_report(&loaded, dir.path().join("sub/")).unwrap();
        for f in ["points.csv", "segment.csv", "dominance.csv", "decisions.csv", "advantage.csv"] {
            let a = fs::read(dir.path().join(format!("r1-{f}"))).unwrap();
            let b = fs::read(dir.path().join("sub").join(f)).unwrap();
            assert_eq!(a, b, "{f}");
        }
        let man: Manifest = serde_json::from_slice(&fs::read(&m2).unwrap()).unwrap();
        assert_eq!(man.files.len(), 5);
        for e in &man.files {
            assert_eq!(e.crc32, crc32(&fs::read(dir.path().join("sub").join(&e.name)).unwrap()));
        }
    }

    #[test]
    fn empty_points_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_report(&Report::default(), dir.path().join("e/")).unwrap();
        assert_eq!(fs::read_to_string(dir.path().join("e/points.csv")).unwrap(), "label,threshold,accuracy,mean_latency_s,n\n");
        assert_eq!(load_report(&m).unwrap(), Report::default());
    }

    #[test]
    fn corrupted_file_detected() {
        let dir = tempfile::tempdir().unwrap();
        let m = emit_report(&sample(), dir.path().join("c-")).unwrap();
        let p = dir.path().join("c-points.csv");
        let mut bytes = fs::read(&p).unwrap();
        bytes[20] ^= 1;
        fs::write(&p, bytes).unwrap();
        assert!(matches!(load_report(&m), Err(EvalError::Checksum { .. })));
    }
}
