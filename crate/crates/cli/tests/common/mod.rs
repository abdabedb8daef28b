#![allow(dead_code)]

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

pub fn routefit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_routefit")).args(args).output().expect("spawn routefit")
}

pub fn ok(args: &[&str]) -> String {
    let out = routefit(args);
    assert!(out.status.success(), "routefit {args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Exit code and standard error.
pub fn fails(args: &[&str]) -> (i32, String) {
    let out = routefit(args);
    (out.status.code().unwrap_or(-1), String::from_utf8_lossy(&out.stderr).into_owned())
}

pub fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Relative path -> bytes for every file under `dir`.
pub fn tree(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in std::fs::read_dir(dir).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

/// Small probes that train in well under a second on synthetic pools.
pub const DIFFICULTY_PROBE: &str = r#"{"hidden": [32, 16], "train": {"learning_rate": 0.01, "epochs": 30}}"#;
pub const CORRECTNESS_PROBE: &str = r#"{"hidden": [64, 32, 16], "per_model_heads": true, "train": {"learning_rate": 0.01, "epochs": 30}}"#;

pub struct Pipeline {
    pub root: PathBuf,
    pub pool: PathBuf,
}

impl Pipeline {
    pub fn layer(&self, l: u32) -> PathBuf {
        self.pool.join(format!("layers/layer{l}.rfemb"))
    }

    pub fn file(&self, name: &str) -> PathBuf {
        self.pool.join(name)
    }

    pub fn write_config(&self, name: &str, json: &str) -> PathBuf {
        let p = self.root.join(name);
        std::fs::write(&p, json).unwrap();
        p
    }

    /// synth with a 300/100/100 split.
    pub fn synth(root: &Path, seed: u64, extra: &str) -> Self {
        let pool = root.join("pool");
        let cfg = root.join(format!("synth{seed}.json"));
        let extra = if extra.is_empty() { String::new() } else { format!(", {extra}") };
        std::fs::write(
            &cfg,
            format!(
                r#"{{"out": {:?}, "seed": {seed}, "split": {{"kind": "counts", "train": 300, "val": 100, "eval": 100}}, "pool": {{"n_problems": 500{extra}}}}}"#,
                s(&pool)
            ),
        )
        .unwrap();
        ok(&["synth", "--config", s(&cfg)]);
        Self { root: root.to_path_buf(), pool }
    }

    pub fn train_difficulty(&self, layer: u32, out: &Path) -> String {
        let cfg = self.write_config(
            "td.json",
            &format!(
                r#"{{"embeddings": {:?}, "problems": {:?}, "split": {{"file": {:?}}}, "out": {:?}, "probe": {DIFFICULTY_PROBE}}}"#,
                s(&self.layer(layer)),
                s(&self.file("problems.jsonl")),
                s(&self.file("split.json")),
                s(out)
            ),
        );
        ok(&["train-difficulty", "--config", s(&cfg)])
    }

    pub fn train_correctness(&self, layer: u32, out: &Path) -> String {
        let cfg = self.write_config(
            "tc.json",
            &format!(
                r#"{{"embeddings": {:?}, "outcomes": {:?}, "split": {{"file": {:?}}}, "out": {:?}, "probe": {CORRECTNESS_PROBE}}}"#,
                s(&self.layer(layer)),
                s(&self.file("outcomes.csv")),
                s(&self.file("split.json")),
                s(out)
            ),
        );
        ok(&["train-correctness", "--config", s(&cfg)])
    }

    /// Route-eval flags shared by the scored policies.
    pub fn route_args<'a>(&'a self, policy: &'a str, predictor: &'a Path, layer: &'a Path, out: &'a Path) -> Vec<String> {
        [
            "route-eval",
            "--policy",
            policy,
            "--predictor",
            s(predictor),
            "--embeddings",
            s(layer),
            "--outcomes",
            s(&self.file("outcomes.csv")),
            "--pool",
            s(&self.file("pool.json")),
            "--split",
            s(&self.file("split.json")),
            "--out",
            s(out),
        ]
        .map(String::from)
        .to_vec()
    }
}

pub fn csv_rows(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(String::from).collect()).collect()
}
