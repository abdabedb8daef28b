//! Shared fixtures for the criterion benches.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use routefit::data::{OutcomeMatrix, OutcomeRecord};
use routefit::tensor::Matrix;
use routefit::{ModelPool, ModelProfile, Scores};

pub fn random_matrix(rows: usize, cols: usize, seed: u64) -> Matrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect()).unwrap()
}

/// `n` problems by `m` models with latency growing in model index.
pub fn outcome_pool(n: usize, m: usize, seed: u64) -> (OutcomeMatrix, ModelPool, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let ids: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let mut recs = Vec::with_capacity(n * m);
    for id in &ids {
        for k in 0..m {
            recs.push(OutcomeRecord {
                problem_id: id.clone(),
                model_id: format!("m{k}"),
                correct: rng.random_bool(0.3 + 0.6 * k as f64 / m as f64),
                latency_s: (1 << k) as f64 * rng.random_range(0.5..1.5),
            });
        }
    }
    let pool = ModelPool::new((0..m).map(|k| ModelProfile::new(format!("m{k}"), k as u32)).collect()).unwrap();
    (OutcomeMatrix::from_records(recs).unwrap(), pool, ids)
}

pub fn random_probs(n: usize, m: usize, seed: u64) -> Scores {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Scores::Correctness((0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect())
}
