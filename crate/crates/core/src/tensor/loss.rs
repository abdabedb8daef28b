use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::{Result, TensorError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    CrossEntropy,
    MaskedBce,
}

/// Supervision targets; the variant selects the loss.
#[derive(Debug, Clone, PartialEq)]
pub enum Targets {
    /// Class indices for softmax cross-entropy.
    Classes(Vec<usize>),
    /// 0/1 targets with a 0/1 mask for sigmoid binary cross-entropy.
    Binary { targets: Matrix, mask: Matrix },
}

impl Targets {
    pub fn kind(&self) -> LossKind {
        match self {
            Targets::Classes(_) => LossKind::CrossEntropy,
            Targets::Binary { .. } => LossKind::MaskedBce,
        }
    }

    pub fn len(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Binary { targets, .. } => targets.rows(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn select(&self, idx: &[usize]) -> Targets {
        match self {
            Targets::Classes(c) => Targets::Classes(idx.iter().map(|&i| c[i]).collect()),
            Targets::Binary { targets, mask } => {
                Targets::Binary { targets: targets.select_rows(idx), mask: mask.select_rows(idx) }
            }
        }
    }

    pub fn slice(&self, start: usize, end: usize) -> Targets {
        match self {
            Targets::Classes(c) => Targets::Classes(c[start..end].to_vec()),
            Targets::Binary { targets, mask } => {
                Targets::Binary { targets: targets.slice_rows(start, end), mask: mask.slice_rows(start, end) }
            }
        }
    }

    /// Mean loss and its gradient with respect to the logits.
    pub fn loss(&self, logits: &Matrix) -> Result<(f64, Matrix)> {
        match self {
            Targets::Classes(labels) => softmax_cross_entropy(logits, labels),
            Targets::Binary { targets, mask } => sigmoid_bce(logits, targets, mask),
        }
    }

    /// Number of supervised entries (batch rows for CE, masked-in cells for BCE).
    pub fn support(&self) -> usize {
        match self {
            Targets::Classes(c) => c.len(),
            Targets::Binary { mask, .. } => mask.data().iter().filter(|&&m| m != 0.0).count(),
        }
    }

    /// Count of correct predictions: top-1 for classes, logit sign against
    /// the 0/1 target for masked-in binary entries.
    pub fn correct_count(&self, logits: &Matrix) -> usize {
        match self {
            Targets::Classes(labels) => {
                (0..logits.rows()).filter(|&r| argmax(logits.row(r)) == labels[r]).count()
            }
            Targets::Binary { targets, mask } => logits
                .data()
                .iter()
                .zip(targets.data())
                .zip(mask.data())
                .filter(|((&z, &t), &m)| m != 0.0 && ((z > 0.0) == (t > 0.5)))
                .count(),
        }
    }
}

pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Row-wise softmax with max subtraction.
pub fn softmax_rows(logits: &Matrix) -> Matrix {
    let mut out = logits.clone();
    for r in 0..out.rows() {
        let row = out.row_mut(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            sum += *v;
        }
        for v in row.iter_mut() {
            *v /= sum;
        }
    }
    out
}

/// Mean softmax cross-entropy over the batch.
pub fn softmax_cross_entropy(logits: &Matrix, labels: &[usize]) -> Result<(f64, Matrix)> {
    let (n, k) = logits.shape();
    if labels.len() != n {
        return Err(TensorError::DimMismatch { op: "softmax_cross_entropy", expected: n, actual: labels.len() });
    }
    if n == 0 {
        return Err(TensorError::EmptyLossSupport);
    }
    if let Some((sample, &label)) = labels.iter().enumerate().find(|(_, &l)| l >= k) {
        return Err(TensorError::LabelOutOfRange { sample, label, num_classes: k });
    }
    let mut grad = Matrix::zeros(n, k);
    let mut total = 0.0;
    let scale = 1.0 / n as f64;
    for (r, &label) in labels.iter().enumerate() {
        let row = logits.row(r);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| (v - max).exp()).sum();
        let log_sum = sum.ln();
        total += log_sum - (row[label] - max);
        let g = grad.row_mut(r);
        for (j, gj) in g.iter_mut().enumerate() {
            let p = (row[j] - max - log_sum).exp();
            *gj = scale * (p - if j == label { 1.0 } else { 0.0 });
        }
    }
    let loss = (total * scale).max(0.0);
    if !loss.is_finite() {
        return Err(TensorError::NonFinite { op: "softmax_cross_entropy" });
    }
    Ok((loss, grad))
}

/// Mean sigmoid binary cross-entropy over masked-in entries, in the
/// `max(z,0) - z t + ln(1 + e^{-|z|})` form.
pub fn sigmoid_bce(logits: &Matrix, targets: &Matrix, mask: &Matrix) -> Result<(f64, Matrix)> {
    if targets.shape() != logits.shape() {
        return Err(TensorError::ShapeMismatch { op: "sigmoid_bce", expected: logits.shape(), actual: targets.shape() });
    }
    if mask.shape() != logits.shape() {
        return Err(TensorError::ShapeMismatch { op: "sigmoid_bce", expected: logits.shape(), actual: mask.shape() });
    }
    let support = mask.data().iter().filter(|&&m| m != 0.0).count();
    if support == 0 {
        return Err(TensorError::EmptyLossSupport);
    }
    let scale = 1.0 / support as f64;
    let (n, k) = logits.shape();
    let mut grad = Matrix::zeros(n, k);
    let mut total = 0.0;
    for (i, ((&z, &t), &m)) in logits.data().iter().zip(targets.data()).zip(mask.data()).enumerate() {
        if m == 0.0 {
            continue;
        }
        total += z.max(0.0) - z * t + (-z.abs()).exp().ln_1p();
        grad.data_mut()[i] = scale * (sigmoid(z) - t);
    }
    let loss = (total * scale).max(0.0);
    if !loss.is_finite() {
        return Err(TensorError::NonFinite { op: "sigmoid_bce" });
    }
    Ok((loss, grad))
}
