use std::collections::HashMap;
use std::fs::File;
use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{io_err, DataError, Result};

const HEADER: [&str; 4] = ["problem_id", "model_id", "correct", "latency_s"];

/// One recorded (problem, model) result.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeRecord {
    pub problem_id: String,
    pub model_id: String,
    pub correct: bool,
    pub latency_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub correct: bool,
    pub latency_s: f64,
}

/// Dense problems × models grid of recorded outcomes with a presence mask.
/// Problem and model order is first-seen order.
#[derive(Debug, Clone, PartialEq)]
pub struct OutcomeMatrix {
    problems: Vec<String>,
    models: Vec<String>,
    problem_index: HashMap<String, usize>,
    model_index: HashMap<String, usize>,
    cells: Vec<Option<Outcome>>,
}

impl OutcomeMatrix {
    pub fn new() -> Self {
        Self {
            problems: Vec::new(),
            models: Vec::new(),
            problem_index: HashMap::new(),
            model_index: HashMap::new(),
            cells: Vec::new(),
        }
    }

    /// Builds a matrix from records; duplicates and bad latencies are errors
    /// (reported against the 1-based record position).
    pub fn from_records<I: IntoIterator<Item = OutcomeRecord>>(records: I) -> Result<Self> {
        let mut m = Self::new();
        for (i, r) in records.into_iter().enumerate() {
            m.insert(r, i + 1)?;
        }
        Ok(m)
    }

    fn insert(&mut self, r: OutcomeRecord, line: usize) -> Result<()> {
        if !(r.latency_s >= 0.0 && r.latency_s.is_finite()) {
            return Err(DataError::BadLatency { line, value: r.latency_s.to_string() });
        }
        let m = match self.model_index.get(&r.model_id) {
            Some(&m) => m,
            None => {
                let m = self.models.len();
                self.models.push(r.model_id.clone());
                self.model_index.insert(r.model_id.clone(), m);
                // widen every existing row by one column
                let old = std::mem::take(&mut self.cells);
                let new_cols = self.models.len();
                self.cells = Vec::with_capacity(self.problems.len() * new_cols);
                for p in 0..self.problems.len() {
                    self.cells.extend_from_slice(&old[p * (new_cols - 1)..(p + 1) * (new_cols - 1)]);
                    self.cells.push(None);
                }
                m
            }
        };
        let p = match self.problem_index.get(&r.problem_id) {
            Some(&p) => p,
            None => {
                let p = self.problems.len();
                self.problems.push(r.problem_id.clone());
                self.problem_index.insert(r.problem_id.clone(), p);
                self.cells.extend(std::iter::repeat_n(None, self.models.len()));
                p
            }
        };
        let cell = &mut self.cells[p * self.models.len() + m];
        if cell.is_some() {
            return Err(DataError::DuplicateOutcome { line, problem: r.problem_id, model: r.model_id });
        }
        *cell = Some(Outcome { correct: r.correct, latency_s: r.latency_s });
        Ok(())
    }

    pub fn problems(&self) -> &[String] {
        &self.problems
    }

    pub fn models(&self) -> &[String] {
        &self.models
    }

    pub fn problem_index(&self, id: &str) -> Option<usize> {
        self.problem_index.get(id).copied()
    }

    pub fn model_index(&self, id: &str) -> Option<usize> {
        self.model_index.get(id).copied()
    }

    pub fn cell(&self, problem: usize, model: usize) -> Option<Outcome> {
        self.cells[problem * self.models.len() + model]
    }

    pub fn get(&self, problem_id: &str, model_id: &str) -> Option<Outcome> {
        let p = self.problem_index(problem_id)?;
        let m = self.model_index(model_id)?;
        self.cell(p, m)
    }

    pub fn is_complete(&self) -> bool {
        self.cells.iter().all(Option::is_some)
    }

    /// Every `(problem, model)` pair with no recorded outcome, in row-major
    /// order of the given lists.
    pub fn missing_cells(&self, problem_ids: &[String], model_ids: &[String]) -> Vec<(String, String)> {
        let mut missing = Vec::new();
        for pid in problem_ids {
            for mid in model_ids {
                if self.get(pid, mid).is_none() {
                    missing.push((pid.clone(), mid.clone()));
                }
            }
        }
        missing
    }

    /// Errors with the first ten missing cells unless the sub-grid is full.
    pub fn require_complete(&self, problem_ids: &[String], model_ids: &[String]) -> Result<()> {
        for mid in model_ids {
            if self.model_index(mid).is_none() {
                return Err(DataError::UnknownModel(mid.clone()));
            }
        }
        let missing = self.missing_cells(problem_ids, model_ids);
        if missing.is_empty() {
            Ok(())
        } else {
            Err(DataError::MissingCells { count: missing.len(), first: missing.into_iter().take(10).collect() })
        }
    }

    /// Fraction correct over the model's recorded cells.
    pub fn accuracy(&self, model_id: &str) -> Option<f64> {
        let (hits, n, _) = self.column_totals(model_id)?;
        (n > 0).then(|| hits as f64 / n as f64)
    }

    /// Mean latency over the model's recorded cells, summed in ascending
    /// order so row order does not matter.
    pub fn mean_latency(&self, model_id: &str) -> Option<f64> {
        let (_, n, total) = self.column_totals(model_id)?;
        (n > 0).then(|| total / n as f64)
    }

    fn column_totals(&self, model_id: &str) -> Option<(usize, usize, f64)> {
        let m = self.model_index(model_id)?;
        let mut hits = 0;
        let mut n = 0;
        let mut lat = Vec::new();
        for p in 0..self.problems.len() {
            if let Some(o) = self.cell(p, m) {
                n += 1;
                hits += usize::from(o.correct);
                lat.push(o.latency_s);
            }
        }
        lat.sort_by(f64::total_cmp);
        Some((hits, n, lat.iter().sum()))
    }

    pub fn records(&self) -> Vec<OutcomeRecord> {
        let mut out = Vec::new();
        for (p, pid) in self.problems.iter().enumerate() {
            for (m, mid) in self.models.iter().enumerate() {
                if let Some(o) = self.cell(p, m) {
                    out.push(OutcomeRecord {
                        problem_id: pid.clone(),
                        model_id: mid.clone(),
                        correct: o.correct,
                        latency_s: o.latency_s,
                    });
                }
            }
        }
        out
    }
}

impl Default for OutcomeMatrix {
    fn default() -> Self {
        Self::new()
    }
}

fn parse_correct(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" | "True" | "TRUE" => Some(true),
        "0" | "false" | "False" | "FALSE" => Some(false),
        _ => None,
    }
}

/// Parses `problem_id,model_id,correct,latency_s` CSV. With `strict`, any
/// missing cell in the resulting grid is an error.
pub fn parse_outcomes<R: Read>(reader: R, strict: bool) -> Result<OutcomeMatrix> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.iter().collect::<Vec<_>>() != HEADER {
        return Err(DataError::Malformed {
            line: 1,
            message: format!("expected header {:?}, found {:?}", HEADER.join(","), headers.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let mut m = OutcomeMatrix::new();
    for rec in rdr.records() {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| rec.get(i).unwrap_or_default();
        let correct = parse_correct(field(2)).ok_or_else(|| DataError::BadCorrect { line, value: field(2).to_string() })?;
        let latency_s: f64 = field(3).parse().map_err(|_| DataError::BadLatency { line, value: field(3).to_string() })?;
        if field(0).is_empty() || field(1).is_empty() {
            return Err(DataError::Malformed { line, message: "empty problem_id or model_id".into() });
        }
        m.insert(
            OutcomeRecord { problem_id: field(0).to_string(), model_id: field(1).to_string(), correct, latency_s },
            line,
        )?;
    }
    if strict {
        let problems = m.problems.clone();
        let models = m.models.clone();
        m.require_complete(&problems, &models)?;
    }
    Ok(m)
}

pub fn load_outcomes(path: impl AsRef<Path>, strict: bool) -> Result<OutcomeMatrix> {
    let path = path.as_ref();
    let file = File::open(path).map_err(io_err(path))?;
    parse_outcomes(file, strict)
}

pub fn write_outcomes(path: impl AsRef<Path>, matrix: &OutcomeMatrix) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(HEADER)?;
    for r in matrix.records() {
        w.write_record([
            r.problem_id.as_str(),
            r.model_id.as_str(),
            if r.correct { "1" } else { "0" },
            &r.latency_s.to_string(),
        ])?;
    }
    w.flush().map_err(io_err(path))
}
