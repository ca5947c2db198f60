//! Dense network parameters and initialization.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::rng::rng_from_seed;

/// Activation applied to hidden layers. The output layer is always linear;
/// sigmoid (classification) or reconstruction losses sit on top of it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum Activation {
    #[default]
    Relu,
    Identity,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Relu => z.max(0.0),
            Activation::Identity => z,
        }
    }

    /// Derivative as a function of the pre-activation value.
    #[inline]
    pub fn grad(self, z: f64) -> f64 {
        match self {
            Activation::Relu => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Identity => 1.0,
        }
    }
}

/// Fully-connected network: weights are row-major `(out × in)` per layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpParams {
    layer_dims: Vec<usize>,
    weights: Vec<Mat>,
    biases: Vec<Vec<f64>>,
    activation: Activation,
}

impl MlpParams {
    /// Glorot-uniform weights, zero biases, deterministic for a given seed.
    pub fn init(layer_dims: &[usize], seed: u64) -> Result<Self> {
        if layer_dims.len() < 2 {
            return Err(Error::Config(format!(
                "architecture needs at least input and output dims, got {layer_dims:?}"
            )));
        }
        if layer_dims.iter().any(|&d| d == 0) {
            return Err(Error::Config(format!(
                "all layer dims must be >= 1, got {layer_dims:?}"
            )));
        }
        let mut rng = rng_from_seed(seed);
        let mut weights = Vec::with_capacity(layer_dims.len() - 1);
        let mut biases = Vec::with_capacity(layer_dims.len() - 1);
        for w in layer_dims.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let mut m = Mat::zeros(fan_out, fan_in);
            for v in m.as_mut_slice() {
                *v = rng.random_range(-limit..limit);
            }
            weights.push(m);
            biases.push(vec![0.0; fan_out]);
        }
        Ok(MlpParams {
            layer_dims: layer_dims.to_vec(),
            weights,
            biases,
            activation: Activation::Relu,
        })
    }

    /// Assembles a network from explicit per-layer weights and biases.
    pub fn from_layers(weights: Vec<Mat>, biases: Vec<Vec<f64>>) -> Result<Self> {
        if weights.is_empty() || weights.len() != biases.len() {
            return Err(Error::Shape(
                "need one weight matrix and one bias vector per layer".into(),
            ));
        }
        let mut layer_dims = vec![weights[0].cols()];
        for (w, b) in weights.iter().zip(&biases) {
            if w.rows() != b.len() {
                return Err(Error::Shape(format!(
                    "bias length {} does not match weight rows {}",
                    b.len(),
                    w.rows()
                )));
            }
            if w.cols() != *layer_dims.last().unwrap() {
                return Err(Error::Shape(format!(
                    "layer input width {} does not chain with previous output {}",
                    w.cols(),
                    layer_dims.last().unwrap()
                )));
            }
            layer_dims.push(w.rows());
        }
        Ok(MlpParams {
            layer_dims,
            weights,
            biases,
            activation: Activation::Relu,
        })
    }

    /// Glues `head` on top of `self` (head input width must equal our output).
    pub fn stacked_with(&self, head: &MlpParams) -> Result<MlpParams> {
        if head.input_dim() != self.output_dim() {
            return Err(Error::Shape(format!(
                "head input {} does not match encoder output {}",
                head.input_dim(),
                self.output_dim()
            )));
        }
        let mut weights = self.weights.clone();
        weights.extend(head.weights.iter().cloned());
        let mut biases = self.biases.clone();
        biases.extend(head.biases.iter().cloned());
        MlpParams::from_layers(weights, biases)
    }

    /// First `n` layers as a standalone network.
    pub fn truncated(&self, n_layers: usize) -> Result<MlpParams> {
        if n_layers == 0 || n_layers > self.n_layers() {
            return Err(Error::Shape(format!(
                "cannot take {} layers of a {}-layer net",
                n_layers,
                self.n_layers()
            )));
        }
        MlpParams::from_layers(
            self.weights[..n_layers].to_vec(),
            self.biases[..n_layers].to_vec(),
        )
    }

    #[inline]
    pub fn layer_dims(&self) -> &[usize] {
        &self.layer_dims
    }

    #[inline]
    pub fn n_layers(&self) -> usize {
        self.weights.len()
    }

    #[inline]
    pub fn input_dim(&self) -> usize {
        self.layer_dims[0]
    }

    #[inline]
    pub fn output_dim(&self) -> usize {
        *self.layer_dims.last().unwrap()
    }

    #[inline]
    pub fn activation(&self) -> Activation {
        self.activation
    }

    #[inline]
    pub fn weight(&self, layer: usize) -> &Mat {
        &self.weights[layer]
    }

    #[inline]
    pub fn bias(&self, layer: usize) -> &[f64] {
        &self.biases[layer]
    }

    #[inline]
    pub fn weight_mut(&mut self, layer: usize) -> &mut Mat {
        &mut self.weights[layer]
    }

    #[inline]
    pub fn bias_mut(&mut self, layer: usize) -> &mut Vec<f64> {
        &mut self.biases[layer]
    }

    /// Total scalar parameter count.
    pub fn n_params(&self) -> usize {
        self.weights
            .iter()
            .map(|w| w.as_slice().len())
            .sum::<usize>()
            + self.biases.iter().map(|b| b.len()).sum::<usize>()
    }

    pub fn all_finite(&self) -> bool {
        self.weights.iter().all(|w| w.all_finite())
            && self
                .biases
                .iter()
                .all(|b| b.iter().all(|v| v.is_finite()))
    }
}
