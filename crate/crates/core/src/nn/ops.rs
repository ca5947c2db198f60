//! Forward and backward passes.

use rand::Rng;

use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::params::MlpParams;
use crate::rng::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Mini-batch container: inputs, optional targets, optional reconstruction mask.
#[derive(Debug, Clone)]
pub struct Batch {
    pub inputs: Mat,
    pub targets: Option<Mat>,
    pub mask: Option<super::loss::Mask>,
}

impl Batch {
    pub fn new(inputs: Mat) -> Self {
        Batch {
            inputs,
            targets: None,
            mask: None,
        }
    }
}

/// Everything backward needs: pre-activations, post-activations (index 0 is
/// the input itself), and the inverted-dropout scale per hidden layer.
#[derive(Debug, Clone)]
pub struct ActivationTrace {
    pub pre: Vec<Mat>,
    pub post: Vec<Mat>,
    dropout_scale: Vec<Option<Mat>>,
}

impl ActivationTrace {
    /// Network output (post-activation of the last layer).
    pub fn output(&self) -> &Mat {
        self.post.last().unwrap()
    }
}

/// Gradients shaped exactly like [`MlpParams`].
#[derive(Debug, Clone)]
pub struct GradientSet {
    pub weights: Vec<Mat>,
    pub biases: Vec<Vec<f64>>,
}

impl GradientSet {
    pub fn zeros_like(params: &MlpParams) -> Self {
        GradientSet {
            weights: (0..params.n_layers())
                .map(|l| Mat::zeros(params.weight(l).rows(), params.weight(l).cols()))
                .collect(),
            biases: (0..params.n_layers())
                .map(|l| vec![0.0; params.bias(l).len()])
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        let mut m: f64 = 0.0;
        for w in &self.weights {
            for &v in w.as_slice() {
                m = m.max(v.abs());
            }
        }
        for b in &self.biases {
            for &v in b {
                m = m.max(v.abs());
            }
        }
        m
    }
}

/// Runs the network over a batch.
///
/// Hidden activations get inverted dropout (scale `1/(1-p)`) in train mode;
/// in eval mode, or with `dropout_rate == 0`, the pass is deterministic and
/// dropout is the identity.
pub fn forward(
    params: &MlpParams,
    inputs: &Mat,
    dropout_rate: f64,
    mode: Mode,
    rng: &mut ChaCha8Rng,
) -> Result<ActivationTrace> {
    if inputs.cols() != params.input_dim() {
        return Err(Error::Shape(format!(
            "input width {} does not match network input dim {}",
            inputs.cols(),
            params.input_dim()
        )));
    }
    if !(0.0..1.0).contains(&dropout_rate) {
        return Err(Error::Config(format!(
            "dropout_rate must be in [0, 1), got {dropout_rate}"
        )));
    }
    let n_layers = params.n_layers();
    let act = params.activation();
    let mut pre = Vec::with_capacity(n_layers);
    let mut post = Vec::with_capacity(n_layers + 1);
    let mut dropout_scale = vec![None; n_layers];
    post.push(inputs.clone());

    for l in 0..n_layers {
        let z = post[l].affine_nt(params.weight(l), params.bias(l));
        let is_output = l == n_layers - 1;
        let mut a = z.clone();
        if !is_output {
            for v in a.as_mut_slice() {
                *v = act.apply(*v);
            }
            if mode == Mode::Train && dropout_rate > 0.0 {
                let keep = 1.0 - dropout_rate;
                let mut scale = Mat::zeros(a.rows(), a.cols());
                for (s, v) in scale.as_mut_slice().iter_mut().zip(a.as_mut_slice()) {
                    *s = if rng.random::<f64>() < keep {
                        1.0 / keep
                    } else {
                        0.0
                    };
                    *v *= *s;
                }
                dropout_scale[l] = Some(scale);
            }
        }
        pre.push(z);
        post.push(a);
    }

    Ok(ActivationTrace {
        pre,
        post,
        dropout_scale,
    })
}

/// Backpropagates `output_grad` (dL/d output) through the trace.
///
/// Returns parameter gradients plus the gradient with respect to the batch
/// inputs (needed to train the mask token).
pub fn backward(
    params: &MlpParams,
    trace: &ActivationTrace,
    output_grad: &Mat,
) -> Result<(GradientSet, Mat)> {
    let n_layers = params.n_layers();
    if trace.pre.len() != n_layers || trace.post.len() != n_layers + 1 {
        return Err(Error::Shape("trace does not match network depth".into()));
    }
    for l in 0..n_layers {
        if trace.post[l].cols() != params.weight(l).cols() {
            return Err(Error::Shape(format!(
                "trace layer {l} width {} does not match weight cols {}",
                trace.post[l].cols(),
                params.weight(l).cols()
            )));
        }
    }
    let out = trace.output();
    if output_grad.rows() != out.rows() || output_grad.cols() != out.cols() {
        return Err(Error::Shape(format!(
            "output_grad is {}x{}, output is {}x{}",
            output_grad.rows(),
            output_grad.cols(),
            out.rows(),
            out.cols()
        )));
    }

    let act = params.activation();
    let mut grads = GradientSet::zeros_like(params);
    let mut dz = output_grad.clone();

    for l in (0..n_layers).rev() {
        dz.accumulate_tn(&trace.post[l], &mut grads.weights[l]);
        let db = &mut grads.biases[l];
        for i in 0..dz.rows() {
            for (bj, &d) in db.iter_mut().zip(dz.row(i)) {
                *bj += d;
            }
        }
        // gradient w.r.t. this layer's input
        let mut d_in = dz.matmul_nn(params.weight(l));
        if l > 0 {
            if let Some(scale) = &trace.dropout_scale[l - 1] {
                for (v, &s) in d_in.as_mut_slice().iter_mut().zip(scale.as_slice()) {
                    *v *= s;
                }
            }
            for (v, &z) in d_in.as_mut_slice().iter_mut().zip(trace.pre[l - 1].as_slice()) {
                *v *= act.grad(z);
            }
        }
        dz = d_in;
    }

    Ok((grads, dz))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::params::MlpParams;
    use crate::rng::rng_from_seed;

    fn eval_forward(params: &MlpParams, inputs: &Mat) -> Mat {
        let mut rng = rng_from_seed(0);
        forward(params, inputs, 0.0, Mode::Eval, &mut rng)
            .unwrap()
            .output()
            .clone()
    }

    #[test]
    fn zero_net_outputs_zero() {
        let mut p = MlpParams::init(&[3, 4, 2], 1).unwrap();
        for l in 0..p.n_layers() {
            p.weight_mut(l).as_mut_slice().fill(0.0);
        }
        let x = Mat::from_vec(2, 3, vec![1.0, -2.0, 3.0, 0.5, 0.0, -1.0]).unwrap();
        let out = eval_forward(&p, &x);
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_layer_affine_arithmetic() {
        // W=[[2]], b=[1], input [3] → 7
        let mut p = MlpParams::init(&[1, 1], 0).unwrap();
        p.weight_mut(0).set(0, 0, 2.0);
        p.bias_mut(0)[0] = 1.0;
        let x = Mat::from_vec(1, 1, vec![3.0]).unwrap();
        assert_eq!(eval_forward(&p, &x).get(0, 0), 7.0);
    }

    #[test]
    fn zero_dropout_train_equals_eval() {
        let p = MlpParams::init(&[5, 8, 3], 9).unwrap();
        let x = Mat::from_vec(4, 5, (0..20).map(|i| i as f64 / 7.0).collect()).unwrap();
        let mut rng = rng_from_seed(1);
        let train = forward(&p, &x, 0.0, Mode::Train, &mut rng).unwrap();
        let eval = eval_forward(&p, &x);
        assert_eq!(train.output(), &eval);
    }

    #[test]
    fn eval_mode_ignores_dropout_rate() {
        let p = MlpParams::init(&[5, 8, 3], 9).unwrap();
        let x = Mat::from_vec(1, 5, vec![0.1, 0.2, 0.3, 0.4, 0.5]).unwrap();
        let mut rng = rng_from_seed(1);
        let a = forward(&p, &x, 0.0, Mode::Eval, &mut rng).unwrap();
        let b = forward(&p, &x, 0.9, Mode::Eval, &mut rng).unwrap();
        assert_eq!(a.output(), b.output());
    }

    #[test]
    fn forward_rejects_width_mismatch() {
        let p = MlpParams::init(&[5, 3], 0).unwrap();
        let x = Mat::zeros(1, 4);
        let mut rng = rng_from_seed(0);
        assert!(forward(&p, &x, 0.0, Mode::Eval, &mut rng).is_err());
    }

    #[test]
    fn zero_output_grad_gives_zero_gradients() {
        let p = MlpParams::init(&[3, 4, 2], 5).unwrap();
        let x = Mat::from_vec(2, 3, vec![1.0, 2.0, 3.0, -1.0, 0.5, 0.25]).unwrap();
        let mut rng = rng_from_seed(0);
        let trace = forward(&p, &x, 0.0, Mode::Eval, &mut rng).unwrap();
        let g0 = Mat::zeros(2, 2);
        let (grads, dx) = backward(&p, &trace, &g0).unwrap();
        assert_eq!(grads.max_abs(), 0.0);
        assert!(dx.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn linear_single_sample_closed_form() {
        // 1-layer linear net, MSE loss on one sample: dW = 2(ŷ−y)·x
        let mut p = MlpParams::init(&[2, 1], 0).unwrap();
        p.weight_mut(0).as_mut_slice().copy_from_slice(&[0.5, -0.25]);
        p.bias_mut(0)[0] = 0.1;
        let x = Mat::from_vec(1, 2, vec![2.0, 4.0]).unwrap();
        let y = 1.0;
        let mut rng = rng_from_seed(0);
        let trace = forward(&p, &x, 0.0, Mode::Eval, &mut rng).unwrap();
        let pred = trace.output().get(0, 0);
        let g = Mat::from_vec(1, 1, vec![2.0 * (pred - y)]).unwrap();
        let (grads, _) = backward(&p, &trace, &g).unwrap();
        let expect = [2.0 * (pred - y) * 2.0, 2.0 * (pred - y) * 4.0];
        assert!((grads.weights[0].get(0, 0) - expect[0]).abs() < 1e-14);
        assert!((grads.weights[0].get(0, 1) - expect[1]).abs() < 1e-14);
        assert!((grads.biases[0][0] - 2.0 * (pred - y)).abs() < 1e-14);
    }

    #[test]
    fn batch_bundles_a_reconstruction_step() {
        use crate::nn::loss::{mse_masked_loss, Mask};
        let p = MlpParams::init(&[3, 5, 3], 13).unwrap();
        let inputs = Mat::from_vec(2, 3, vec![0.2, -0.1, 0.4, 1.0, 0.5, -0.3]).unwrap();
        let mut mask = Mask::new(2, 3);
        mask.set(0, 1, true);
        mask.set(1, 2, true);
        let batch = Batch {
            targets: Some(inputs.clone()),
            mask: Some(mask),
            inputs,
        };
        let mut rng = rng_from_seed(0);
        let trace = forward(&p, &batch.inputs, 0.0, Mode::Train, &mut rng).unwrap();
        let (loss, grad) = mse_masked_loss(
            trace.output(),
            batch.targets.as_ref().unwrap(),
            batch.mask.as_ref().unwrap(),
        )
        .unwrap();
        assert!(loss.is_finite());
        let (grads, _) = backward(&p, &trace, &grad).unwrap();
        assert!(grads.max_abs() > 0.0);
    }

    #[test]
    fn backward_rejects_stale_trace() {
        let p1 = MlpParams::init(&[3, 4, 2], 5).unwrap();
        let p2 = MlpParams::init(&[3, 5, 2], 5).unwrap();
        let x = Mat::zeros(1, 3);
        let mut rng = rng_from_seed(0);
        let trace = forward(&p1, &x, 0.0, Mode::Eval, &mut rng).unwrap();
        let g = Mat::zeros(1, 2);
        assert!(backward(&p2, &trace, &g).is_err());
    }
}
