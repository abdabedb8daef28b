use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, DataError, Result};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub id: String,
    pub text: String,
    #[serde(default)]
    pub source: String,
    /// 1 (easiest) to 5 (hardest) when labelled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub difficulty: Option<u8>,
}

#[derive(Deserialize)]
struct RawProblem {
    id: String,
    text: String,
    #[serde(default)]
    source: String,
    #[serde(default)]
    difficulty: Option<i64>,
}

/// Parses JSONL, one problem object per line. Blank lines are skipped;
/// line numbers in errors are 1-based.
pub fn parse_problems<R: BufRead>(reader: R) -> Result<Vec<Problem>> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line.map_err(|e| DataError::Malformed { line: line_no, message: e.to_string() })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawProblem = serde_json::from_str(&line)
            .map_err(|e| DataError::Malformed { line: line_no, message: e.to_string() })?;
        if raw.id.is_empty() {
            return Err(DataError::Malformed { line: line_no, message: "empty id".into() });
        }
        let difficulty = match raw.difficulty {
            None => None,
            Some(d @ 1..=5) => Some(d as u8),
            Some(value) => return Err(DataError::DifficultyOutOfRange { line: line_no, value }),
        };
        if !seen.insert(raw.id.clone()) {
            return Err(DataError::DuplicateId { line: line_no, id: raw.id });
        }
        out.push(Problem { id: raw.id, text: raw.text, source: raw.source, difficulty });
    }
    Ok(out)
}

pub fn load_problems(path: impl AsRef<Path>) -> Result<Vec<Problem>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_problems(BufReader::new(file))
}

pub fn write_problems(path: impl AsRef<Path>, problems: &[Problem]) -> Result<()> {
    let path = path.as_ref();
    let mut w = BufWriter::new(File::create(path).map_err(io_err(path))?);
    for p in problems {
        serde_json::to_writer(&mut w, p)?;
        w.write_all(b"\n").map_err(io_err(path))?;
    }
    w.flush().map_err(io_err(path))
}

/// Counts of difficulty levels 1..=5 (index 0 is level 1); unlabelled
/// problems are not counted.
pub fn difficulty_histogram(problems: &[Problem]) -> [usize; 5] {
    let mut h = [0usize; 5];
    for d in problems.iter().filter_map(|p| p.difficulty) {
        h[usize::from(d) - 1] += 1;
    }
    h
}
