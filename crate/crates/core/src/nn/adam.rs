//! Adam optimizer with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::ops::GradientSet;
use crate::nn::params::MlpParams;

pub const DEFAULT_BETA1: f64 = 0.9;
pub const DEFAULT_BETA2: f64 = 0.999;
pub const DEFAULT_EPS: f64 = 1e-8;

/// First/second-moment accumulators shaped like the network, plus the
/// hyperparameters of the update rule.
///
/// Weight decay is decoupled: `p ← p·(1 − lr·l2)` is applied before the
/// bias-corrected Adam step, so loss gradients stay regularization-free.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    m_w: Vec<Mat>,
    v_w: Vec<Mat>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: u64,
    pub learning_rate: f64,
    pub l2: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(params: &MlpParams, learning_rate: f64, l2: f64) -> Result<Self> {
        if learning_rate <= 0.0 {
            return Err(Error::Config(format!(
                "learning_rate must be positive, got {learning_rate}"
            )));
        }
        if l2 < 0.0 {
            return Err(Error::Config(format!("l2 must be non-negative, got {l2}")));
        }
        Ok(AdamState {
            m_w: (0..params.n_layers())
                .map(|l| Mat::zeros(params.weight(l).rows(), params.weight(l).cols()))
                .collect(),
            v_w: (0..params.n_layers())
                .map(|l| Mat::zeros(params.weight(l).rows(), params.weight(l).cols()))
                .collect(),
            m_b: (0..params.n_layers())
                .map(|l| vec![0.0; params.bias(l).len()])
                .collect(),
            v_b: (0..params.n_layers())
                .map(|l| vec![0.0; params.bias(l).len()])
                .collect(),
            step: 0,
            learning_rate,
            l2,
            beta1: DEFAULT_BETA1,
            beta2: DEFAULT_BETA2,
            eps: DEFAULT_EPS,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }
}

/// One bias-corrected Adam update on a flat parameter slice.
#[allow(clippy::too_many_arguments)]
pub(crate) fn adam_update_slice(
    p: &mut [f64],
    g: &[f64],
    m: &mut [f64],
    v: &mut [f64],
    t: u64,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
) {
    let bc1 = 1.0 - beta1.powi(t as i32);
    let bc2 = 1.0 - beta2.powi(t as i32);
    for i in 0..p.len() {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        let m_hat = m[i] / bc1;
        let v_hat = v[i] / bc2;
        p[i] -= lr * m_hat / (v_hat.sqrt() + eps);
    }
}

/// Updates every layer. See [`adam_step_masked`] for partial freezing.
pub fn adam_step(
    state: &mut AdamState,
    params: &mut MlpParams,
    grads: &GradientSet,
) -> Result<()> {
    let all = vec![true; params.n_layers()];
    adam_step_masked(state, params, grads, &all)
}

/// Updates only layers flagged `true`; frozen layers keep their weights,
/// decay, and accumulators bit-identical.
///
/// Aborts (without touching any parameter) if a gradient is non-finite,
/// reporting the offending layer and the largest finite magnitude seen.
pub fn adam_step_masked(
    state: &mut AdamState,
    params: &mut MlpParams,
    grads: &GradientSet,
    trainable: &[bool],
) -> Result<()> {
    if grads.weights.len() != params.n_layers() || trainable.len() != params.n_layers() {
        return Err(Error::Shape(
            "gradient/trainable layer count does not match params".into(),
        ));
    }
    for l in 0..params.n_layers() {
        let finite = grads.weights[l].all_finite() && grads.biases[l].iter().all(|v| v.is_finite());
        if !finite {
            let max_mag = grads
                .weights[l]
                .as_slice()
                .iter()
                .chain(grads.biases[l].iter())
                .filter(|v| v.is_finite())
                .fold(0.0f64, |a, &b| a.max(b.abs()));
            return Err(Error::Numerical(format!(
                "non-finite gradient in layer {l} (max finite magnitude {max_mag:.3e})"
            )));
        }
    }

    state.step += 1;
    let (t, lr, l2) = (state.step, state.learning_rate, state.l2);
    let (b1, b2, eps) = (state.beta1, state.beta2, state.eps);
    let decay = 1.0 - lr * l2;
    for l in 0..params.n_layers() {
        if !trainable[l] {
            continue;
        }
        if l2 > 0.0 {
            for w in params.weight_mut(l).as_mut_slice() {
                *w *= decay;
            }
            for b in params.bias_mut(l).iter_mut() {
                *b *= decay;
            }
        }
        adam_update_slice(
            params.weight_mut(l).as_mut_slice(),
            grads.weights[l].as_slice(),
            state.m_w[l].as_mut_slice(),
            state.v_w[l].as_mut_slice(),
            t,
            lr,
            b1,
            b2,
            eps,
        );
        adam_update_slice(
            params.bias_mut(l),
            &grads.biases[l],
            &mut state.m_b[l],
            &mut state.v_b[l],
            t,
            lr,
            b1,
            b2,
            eps,
        );
    }
    Ok(())
}

/// Adam accumulators for a standalone parameter vector (the mask token).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamVec {
    m: Vec<f64>,
    v: Vec<f64>,
    step: u64,
}

impl AdamVec {
    pub fn new(len: usize) -> Self {
        AdamVec {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }

    pub fn step(&mut self, p: &mut [f64], g: &[f64], lr: f64) -> Result<()> {
        if g.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(
                "non-finite gradient in mask token".into(),
            ));
        }
        self.step += 1;
        adam_update_slice(
            p,
            g,
            &mut self.m,
            &mut self.v,
            self.step,
            lr,
            DEFAULT_BETA1,
            DEFAULT_BETA2,
            DEFAULT_EPS,
        );
        Ok(())
    }
}
