//! Run configuration: a JSON file (unknown keys rejected) overlaid by flags.
//! Every command writes the merged result as a snapshot that reruns it.

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use routefit::data::{read_split, split, split_stratified, Split, SplitSizes, SplitSpec};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SNAPSHOT_NAME: &str = "resolved_config.json";

/// Defaults, then the file at `path` if given.
pub fn load<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
}

pub fn write_snapshot<T: Serialize>(config: &T, path: &Path) -> Result<()> {
    ensure_parent(path)?;
    let mut text = serde_json::to_string_pretty(config).map_err(|e| CliError::config(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| CliError::data(format!("{}: {e}", path.display())))
}

pub fn ensure_parent(path: &Path) -> Result<()> {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => fs::create_dir_all(p).map_err(|e| CliError::data(format!("{}: {e}", p.display()))),
        _ => Ok(()),
    }
}

pub fn require<'a, T>(value: &'a Option<T>, key: &str, flag: &str) -> Result<&'a T> {
    value.as_ref().ok_or_else(|| CliError::missing_key(key, flag))
}

/// `base` with `suffix` appended to its final component.
pub fn with_suffix(base: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(base.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

pub fn set<T>(slot: &mut T, flag: Option<T>) {
    if let Some(v) = flag {
        *slot = v;
    }
}

pub fn set_some<T>(slot: &mut Option<T>, flag: Option<T>) {
    if flag.is_some() {
        *slot = flag;
    }
}

/// Either a split file written by `synth` or sizes drawn from the run seed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSource {
    pub file: Option<PathBuf>,
    pub sizes: Option<SplitSizes>,
    /// Only used with `sizes`; stratifies by difficulty when labels exist.
    pub stratify: bool,
}

impl SplitSource {
    /// `ids` in a fixed order; `keys` (same length) enables stratification.
    pub fn resolve(&self, seed: u64, ids: &[String], keys: Option<&[String]>) -> Result<Split> {
        if let Some(file) = &self.file {
            return Ok(read_split(file)?);
        }
        let Some(sizes) = self.sizes else {
            return Err(CliError::missing_key("split.file` or `split.sizes", "--split"));
        };
        let spec = SplitSpec { seed, sizes, stratify: self.stratify };
        match keys {
            Some(k) if self.stratify => Ok(split_stratified(ids, k, &spec)?),
            _ => Ok(split(ids, &spec)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Default, PartialEq, Serialize, Deserialize)]
    #[serde(deny_unknown_fields, default)]
    struct Demo {
        a: Option<PathBuf>,
        n: usize,
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"n": 3, "bogus": 1}"#).unwrap();
        let err = load::<Demo>(Some(&p)).unwrap_err();
        assert_eq!(err.kind.exit_code(), 2);
        assert!(err.message.contains("bogus"), "{}", err.message);
    }

    #[test]
    fn missing_file_keys_fall_back_to_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.json");
        fs::write(&p, r#"{"n": 3}"#).unwrap();
        assert_eq!(load::<Demo>(Some(&p)).unwrap(), Demo { a: None, n: 3 });
        assert_eq!(load::<Demo>(None).unwrap(), Demo::default());
    }

    #[test]
    fn snapshot_round_trips() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("sub/resolved.json");
        let d = Demo { a: Some("x/y".into()), n: 9 };
        write_snapshot(&d, &p).unwrap();
        assert_eq!(load::<Demo>(Some(&p)).unwrap(), d);
    }

    #[test]
    fn missing_key_names_the_key() {
        let e = require::<PathBuf>(&None, "embeddings", "--embeddings").unwrap_err();
        assert!(e.message.contains("`embeddings`"));
        assert_eq!(e.kind.exit_code(), 2);
    }
}
