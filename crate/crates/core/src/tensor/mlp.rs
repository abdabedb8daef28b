use std::sync::atomic::{AtomicU64, Ordering};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::matrix::Matrix;
use super::{Result, TensorError};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Identity,
    Relu,
}

impl Activation {
    pub(crate) fn code(self) -> u8 {
        match self {
            Activation::Identity => 0,
            Activation::Relu => 1,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Relu),
            _ => None,
        }
    }
}

/// `y = act(W x + b)` with `W: out_dim × in_dim`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    weights: Matrix,
    bias: Vec<f64>,
    activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self> {
        if bias.len() != weights.rows() {
            return Err(TensorError::DimMismatch { op: "DenseLayer::new", expected: weights.rows(), actual: bias.len() });
        }
        if !bias.iter().all(|b| b.is_finite()) {
            return Err(TensorError::NonFinite { op: "DenseLayer::new" });
        }
        Ok(Self { weights, bias, activation })
    }

    pub fn in_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.rows()
    }

    pub fn weights(&self) -> &Matrix {
        &self.weights
    }

    pub fn bias(&self) -> &[f64] {
        &self.bias
    }

    pub fn activation(&self) -> Activation {
        self.activation
    }

    fn apply(&self, input: &Matrix) -> Matrix {
        let mut out = input.matmul_transposed(&self.weights).expect("layer chain validated");
        for r in 0..out.rows() {
            let row = out.row_mut(r);
            for (v, b) in row.iter_mut().zip(&self.bias) {
                *v += b;
                if self.activation == Activation::Relu && *v < 0.0 {
                    *v = 0.0;
                }
            }
        }
        out
    }
}

static NEXT_TOKEN: AtomicU64 = AtomicU64::new(1);

fn fresh_token() -> u64 {
    NEXT_TOKEN.fetch_add(1, Ordering::Relaxed)
}

/// Feed-forward network. Hidden layers use ReLU; the output layer is always
/// linear so the loss owns the final nonlinearity.
///
/// An empty layer list is allowed and acts as the identity map; it has no
/// parameters.
#[derive(Debug)]
pub struct Mlp {
    input_dim: usize,
    layers: Vec<DenseLayer>,
    // Changes on every parameter update; ties forward caches to a parameter state.
    token: u64,
}

impl Clone for Mlp {
    fn clone(&self) -> Self {
        Self { input_dim: self.input_dim, layers: self.layers.clone(), token: self.token }
    }
}

impl PartialEq for Mlp {
    fn eq(&self, other: &Self) -> bool {
        self.input_dim == other.input_dim && self.layers == other.layers
    }
}

/// Activations recorded by [`Mlp::forward`]: the input of every layer plus
/// the final output.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    token: u64,
    activations: Vec<Matrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerGradient {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// Parameter gradients, one entry per layer, shaped like the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<LayerGradient>,
}

impl Gradients {
    pub fn zeros_like(model: &Mlp) -> Self {
        Self {
            layers: model
                .layers
                .iter()
                .map(|l| LayerGradient { weights: Matrix::zeros(l.out_dim(), l.in_dim()), bias: vec![0.0; l.out_dim()] })
                .collect(),
        }
    }

    /// Flat views in parameter order (per layer: weights, then bias).
    pub fn slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|g| [g.weights.data(), g.bias.as_slice()]).collect()
    }

    pub fn slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.layers.iter_mut().flat_map(|g| [g.weights.data_mut(), g.bias.as_mut_slice()]).collect()
    }
}

impl Mlp {
    /// Validates the layer chain and takes ownership of the layers.
    pub fn from_layers(input_dim: usize, layers: Vec<DenseLayer>) -> Result<Self> {
        let mut prev = input_dim;
        for (i, layer) in layers.iter().enumerate() {
            if layer.in_dim() != prev {
                return Err(TensorError::InvalidLayers(format!(
                    "layer {i} expects input {} but previous width is {prev}",
                    layer.in_dim()
                )));
            }
            prev = layer.out_dim();
        }
        if let Some(last) = layers.last() {
            if last.activation != Activation::Identity {
                return Err(TensorError::InvalidLayers("output layer must be linear".into()));
            }
        }
        Ok(Self { input_dim, layers, token: fresh_token() })
    }

    /// Network `input_dim → hidden… → output_dim` with ReLU hidden units,
    /// uniform ±sqrt(6/(fan_in+fan_out)) weights and zero biases.
    pub fn init(input_dim: usize, hidden: &[usize], output_dim: usize, seed: u64) -> Result<Self> {
        let widths: Vec<usize> = std::iter::once(input_dim).chain(hidden.iter().copied()).chain([output_dim]).collect();
        if widths.iter().any(|&w| w == 0) {
            return Err(TensorError::InvalidLayers(format!("zero-width layer in {widths:?}")));
        }
        let mut rng = seed::rng(seed);
        let mut layers = Vec::with_capacity(widths.len() - 1);
        for (i, pair) in widths.windows(2).enumerate() {
            let (fan_in, fan_out) = (pair[0], pair[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let data: Vec<f64> = (0..fan_in * fan_out).map(|_| rng.random_range(-limit..limit)).collect();
            let activation = if i + 2 == widths.len() { Activation::Identity } else { Activation::Relu };
            layers.push(DenseLayer {
                weights: Matrix::from_raw(fan_out, fan_in, data),
                bias: vec![0.0; fan_out],
                activation,
            });
        }
        Self::from_layers(input_dim, layers)
    }

    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().map_or(self.input_dim, DenseLayer::out_dim)
    }

    pub fn layers(&self) -> &[DenseLayer] {
        &self.layers
    }

    /// Widths along the chain: `[input, hidden…, output]`.
    pub fn dims(&self) -> Vec<usize> {
        std::iter::once(self.input_dim).chain(self.layers.iter().map(DenseLayer::out_dim)).collect()
    }

    pub fn param_count(&self) -> usize {
        self.layers.iter().map(|l| l.weights.data().len() + l.bias.len()).sum()
    }

    /// Flat mutable views in parameter order (per layer: weights, then bias).
    /// Invalidates outstanding forward caches.
    pub fn param_slices_mut(&mut self) -> Vec<&mut [f64]> {
        self.token = fresh_token();
        self.layers.iter_mut().flat_map(|l| [l.weights.data_mut(), l.bias.as_mut_slice()]).collect()
    }

    pub fn param_slices(&self) -> Vec<&[f64]> {
        self.layers.iter().flat_map(|l| [l.weights.data(), l.bias.as_slice()]).collect()
    }

    fn check_input(&self, batch: &Matrix) -> Result<()> {
        if batch.cols() != self.input_dim {
            return Err(TensorError::DimMismatch { op: "forward", expected: self.input_dim, actual: batch.cols() });
        }
        Ok(())
    }

    /// Output logits without recording activations.
    pub fn predict(&self, batch: &Matrix) -> Result<Matrix> {
        self.check_input(batch)?;
        let mut x = batch.clone();
        for layer in &self.layers {
            x = layer.apply(&x);
        }
        if !x.is_finite() {
            return Err(TensorError::NonFinite { op: "forward" });
        }
        Ok(x)
    }

    pub fn forward(&self, batch: &Matrix) -> Result<(Matrix, ForwardCache)> {
        self.check_input(batch)?;
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        activations.push(batch.clone());
        for layer in &self.layers {
            let next = layer.apply(activations.last().unwrap());
            activations.push(next);
        }
        let logits = activations.last().unwrap().clone();
        if !logits.is_finite() {
            return Err(TensorError::NonFinite { op: "forward" });
        }
        Ok((logits, ForwardCache { token: self.token, activations }))
    }

    pub fn backward(&self, cache: &ForwardCache, grad_logits: &Matrix) -> Result<Gradients> {
        if cache.token != self.token || cache.activations.len() != self.layers.len() + 1 {
            return Err(TensorError::StaleCache);
        }
        let out = cache.activations.last().unwrap();
        if grad_logits.shape() != out.shape() {
            return Err(TensorError::ShapeMismatch { op: "backward", expected: out.shape(), actual: grad_logits.shape() });
        }
        let mut grads = Vec::with_capacity(self.layers.len());
        let mut delta = grad_logits.clone();
        for (k, layer) in self.layers.iter().enumerate().rev() {
            if layer.activation == Activation::Relu {
                let post = &cache.activations[k + 1];
                for (d, &a) in delta.data_mut().iter_mut().zip(post.data()) {
                    if a <= 0.0 {
                        *d = 0.0;
                    }
                }
            }
            let input = &cache.activations[k];
            let weights = delta.transposed_matmul(input)?;
            let bias = delta.column_sums();
            if k > 0 {
                delta = delta.matmul(&layer.weights)?;
            }
            grads.push(LayerGradient { weights, bias });
        }
        grads.reverse();
        let grads = Gradients { layers: grads };
        if !grads.slices().iter().all(|s| s.iter().all(|v| v.is_finite())) {
            return Err(TensorError::NonFinite { op: "backward" });
        }
        Ok(grads)
    }
}
