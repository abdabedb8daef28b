use serde::{Deserialize, Serialize};

use super::mlp::{Gradients, Mlp};
use super::train::TrainConfig;
use super::{Result, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Optimizer {
    Adam { beta1: f64, beta2: f64, epsilon: f64 },
    Sgd,
}

impl Default for Optimizer {
    fn default() -> Self {
        Optimizer::Adam { beta1: 0.9, beta2: 0.999, epsilon: 1e-8 }
    }
}

/// Per-parameter first and second moment accumulators, laid out like
/// [`Mlp::param_slices`].
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub first_moment: Vec<Vec<f64>>,
    pub second_moment: Vec<Vec<f64>>,
    pub step_count: u64,
}

impl AdamState {
    pub fn for_model(model: &Mlp) -> Self {
        let zeros: Vec<Vec<f64>> = model.param_slices().iter().map(|s| vec![0.0; s.len()]).collect();
        Self { first_moment: zeros.clone(), second_moment: zeros, step_count: 0 }
    }
}

/// Applies one update. Adam uses bias-corrected moments:
/// `p -= lr · m̂ / (sqrt(v̂) + ε)`.
pub fn optimizer_step(model: &mut Mlp, grads: &Gradients, state: &mut AdamState, config: &TrainConfig) -> Result<()> {
    let lr = config.learning_rate;
    let grad_slices = grads.slices();
    let shapes_match = {
        let params = model.param_slices();
        params.len() == grad_slices.len()
            && params.len() == state.first_moment.len()
            && params.iter().zip(&grad_slices).all(|(p, g)| p.len() == g.len())
            && params.iter().zip(&state.first_moment).all(|(p, m)| p.len() == m.len())
    };
    if !shapes_match {
        return Err(TensorError::InvalidLayers("gradient or optimizer state does not mirror model parameters".into()));
    }
    match config.optimizer {
        Optimizer::Sgd => {
            for (p, g) in model.param_slices_mut().into_iter().zip(&grad_slices) {
                for (pi, gi) in p.iter_mut().zip(g.iter()) {
                    *pi -= lr * gi;
                }
            }
            state.step_count += 1;
        }
        Optimizer::Adam { beta1, beta2, epsilon } => {
            state.step_count += 1;
            let t = state.step_count as i32;
            let c1 = 1.0 - beta1.powi(t);
            let c2 = 1.0 - beta2.powi(t);
            let params = model.param_slices_mut();
            for (((p, g), m), v) in params
                .into_iter()
                .zip(&grad_slices)
                .zip(state.first_moment.iter_mut())
                .zip(state.second_moment.iter_mut())
            {
                for i in 0..p.len() {
                    let gi = g[i];
                    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                    let m_hat = m[i] / c1;
                    let v_hat = v[i] / c2;
                    p[i] -= lr * m_hat / (v_hat.sqrt() + epsilon);
                }
            }
        }
    }
    if !model.param_slices().iter().all(|s| s.iter().all(|v| v.is_finite())) {
        return Err(TensorError::NonFinite { op: "optimizer_step" });
    }
    Ok(())
}
