use super::loss::Targets;
use super::matrix::Matrix;
use super::mlp::{Gradients, Mlp};
use super::{Result, TensorError};

/// Denominator floor for the relative error `|a - n| / max(|a|, |n|, FLOOR)`.
/// Central differences carry roughly `1e-16 · |loss| / epsilon` of rounding
/// noise (about 1e-11 at epsilon 1e-5), so gradients below the floor are
/// compared absolutely instead.
pub const RELATIVE_ERROR_FLOOR: f64 = 1e-6;

/// Parameter address: layer, tensor within the layer (0 = weights, 1 = bias), flat index.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamLocation {
    pub layer: usize,
    pub tensor: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_relative_error: f64,
    pub worst: Option<ParamLocation>,
    pub checked: usize,
}

/// Compares backprop gradients to central differences over every parameter.
pub fn grad_check(model: &Mlp, targets: &Targets, batch: &Matrix, epsilon: f64) -> Result<GradCheckReport> {
    let (logits, cache) = model.forward(batch)?;
    let (_, grad) = targets.loss(&logits)?;
    let analytic = model.backward(&cache, &grad)?;
    compare_gradients(model, targets, batch, epsilon, &analytic)
}

/// Central-difference check of arbitrary analytic gradients; exposed so a
/// deliberately broken gradient can be fed through the same checker.
pub fn compare_gradients(
    model: &Mlp,
    targets: &Targets,
    batch: &Matrix,
    epsilon: f64,
    analytic: &Gradients,
) -> Result<GradCheckReport> {
    if !(epsilon > 0.0) {
        return Err(TensorError::InvalidConfig(format!("epsilon must be > 0, got {epsilon}")));
    }
    let loss_at = |m: &Mlp| -> Result<f64> { Ok(targets.loss(&m.predict(batch)?)?.0) };
    let analytic = analytic.slices();
    let mut work = model.clone();
    let sizes: Vec<usize> = work.param_slices().iter().map(|s| s.len()).collect();
    if sizes.len() != analytic.len() || sizes.iter().zip(&analytic).any(|(&n, a)| n != a.len()) {
        return Err(TensorError::InvalidLayers("analytic gradients do not mirror model parameters".into()));
    }

    let mut report = GradCheckReport { max_relative_error: 0.0, worst: None, checked: 0 };
    for (t, &len) in sizes.iter().enumerate() {
        for i in 0..len {
            let original = work.param_slices()[t][i];
            work.param_slices_mut()[t][i] = original + epsilon;
            let plus = loss_at(&work)?;
            work.param_slices_mut()[t][i] = original - epsilon;
            let minus = loss_at(&work)?;
            work.param_slices_mut()[t][i] = original;

            let numeric = (plus - minus) / (2.0 * epsilon);
            let a = analytic[t][i];
            let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(RELATIVE_ERROR_FLOOR);
            report.checked += 1;
            if rel > report.max_relative_error {
                report.max_relative_error = rel;
                report.worst = Some(ParamLocation { layer: t / 2, tensor: t % 2, index: i });
            }
        }
    }
    Ok(report)
}
