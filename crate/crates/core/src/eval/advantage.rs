use serde::{Deserialize, Serialize};

use super::Result;
use crate::data::OutcomeMatrix;

/// `counts[i][j]`: problems model `i` solves and model `j` does not.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdvantageMatrix {
    pub models: Vec<String>,
    pub counts: Vec<Vec<usize>>,
}

impl AdvantageMatrix {
    pub fn difference(&self, i: usize, j: usize) -> i64 {
        self.counts[i][j] as i64 - self.counts[j][i] as i64
    }

    pub fn differences(&self) -> Vec<Vec<i64>> {
        let n = self.models.len();
        (0..n).map(|i| (0..n).map(|j| self.difference(i, j)).collect()).collect()
    }
}

/// Over every problem in the matrix; all cells for `models` must be present.
pub fn advantage_matrix(outcomes: &OutcomeMatrix, models: &[String]) -> Result<AdvantageMatrix> {
    outcomes.require_complete(outcomes.problems(), models)?;
    let n = models.len();
    let cols: Vec<usize> = models.iter().map(|m| outcomes.model_index(m).expect("checked")).collect();
    let mut counts = vec![vec![0usize; n]; n];
    for p in 0..outcomes.problems().len() {
        let row: Vec<bool> = cols.iter().map(|&c| outcomes.cell(p, c).expect("checked").correct).collect();
        for i in 0..n {
            if !row[i] {
                continue;
            }
            for j in 0..n {
                if !row[j] {
                    counts[i][j] += 1;
                }
            }
        }
    }
    Ok(AdvantageMatrix { models: models.to_vec(), counts })
}
