//! Central-difference gradient verification.

use rand::Rng;

use crate::nn::ops::GradientSet;
use crate::nn::params::MlpParams;
use crate::rng::rng_from_seed;

/// Coordinates checked when the network has more parameters than this.
const SAMPLED_COORDS: usize = 256;

/// Compares the analytic gradient against central finite differences on a
/// sampled subset of coordinates and returns the maximum relative error.
///
/// `f` must be deterministic (run dropout in eval mode) and return the loss
/// together with its analytic gradient. Relative error uses
/// `|a − n| / max(|a|, |n|, 1e-6)` so near-zero coordinates are compared on
/// an absolute scale.
pub fn grad_check<F>(params: &MlpParams, f: F, eps: f64, seed: u64) -> f64
where
    F: Fn(&MlpParams) -> (f64, GradientSet),
{
    let (_, analytic) = f(params);
    let total = params.n_params();
    let coords: Vec<usize> = if total <= SAMPLED_COORDS {
        (0..total).collect()
    } else {
        let mut rng = rng_from_seed(seed);
        let mut chosen = std::collections::BTreeSet::new();
        while chosen.len() < SAMPLED_COORDS {
            chosen.insert(rng.random_range(0..total));
        }
        chosen.into_iter().collect()
    };

    let mut max_rel = 0.0f64;
    let mut work = params.clone();
    for &c in &coords {
        let orig = get_coord(&work, c);
        set_coord(&mut work, c, orig + eps);
        let (lp, _) = f(&work);
        set_coord(&mut work, c, orig - eps);
        let (lm, _) = f(&work);
        set_coord(&mut work, c, orig);
        let numeric = (lp - lm) / (2.0 * eps);
        let a = get_grad_coord(&analytic, c);
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
        max_rel = max_rel.max(rel);
    }
    max_rel
}

/// Flat coordinate order: layer 0 weights, layer 0 biases, layer 1 weights, …
fn locate(params: &MlpParams, c: usize) -> (usize, bool, usize) {
    let mut off = c;
    for l in 0..params.n_layers() {
        let nw = params.weight(l).as_slice().len();
        if off < nw {
            return (l, false, off);
        }
        off -= nw;
        let nb = params.bias(l).len();
        if off < nb {
            return (l, true, off);
        }
        off -= nb;
    }
    panic!("coordinate {c} out of range");
}

fn get_coord(params: &MlpParams, c: usize) -> f64 {
    let (l, is_bias, i) = locate(params, c);
    if is_bias {
        params.bias(l)[i]
    } else {
        params.weight(l).as_slice()[i]
    }
}

fn set_coord(params: &mut MlpParams, c: usize, v: f64) {
    let (l, is_bias, i) = locate(params, c);
    if is_bias {
        params.bias_mut(l)[i] = v;
    } else {
        params.weight_mut(l).as_mut_slice()[i] = v;
    }
}

fn get_grad_coord(grads: &GradientSet, c: usize) -> f64 {
    let mut off = c;
    for l in 0..grads.weights.len() {
        let nw = grads.weights[l].as_slice().len();
        if off < nw {
            return grads.weights[l].as_slice()[off];
        }
        off -= nw;
        let nb = grads.biases[l].len();
        if off < nb {
            return grads.biases[l][off];
        }
        off -= nb;
    }
    panic!("coordinate {c} out of range");
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mat::Mat;
    use crate::nn::loss::{bce_loss, sigmoid};
    use crate::nn::ops::{backward, forward, Mode};

    fn mse_closure<'a>(
        x: &'a Mat,
        y: &'a Mat,
    ) -> impl Fn(&MlpParams) -> (f64, GradientSet) + 'a {
        move |p: &MlpParams| {
            let mut rng = rng_from_seed(0);
            let trace = forward(p, x, 0.0, Mode::Eval, &mut rng).unwrap();
            let out = trace.output();
            let n = (out.rows() * out.cols()) as f64;
            let mut loss = 0.0;
            let mut g = Mat::zeros(out.rows(), out.cols());
            for i in 0..out.rows() {
                for j in 0..out.cols() {
                    let e = out.get(i, j) - y.get(i, j);
                    loss += e * e / n;
                    g.set(i, j, 2.0 * e / n);
                }
            }
            let (grads, _) = backward(p, &trace, &g).unwrap();
            (loss, grads)
        }
    }

    #[test]
    fn linear_model_mse_is_exact() {
        let p = MlpParams::init(&[3, 2], 5).unwrap();
        let x = Mat::from_vec(4, 3, (0..12).map(|i| (i as f64) / 5.0 - 1.0).collect()).unwrap();
        let y = Mat::from_vec(4, 2, (0..8).map(|i| (i as f64) / 3.0).collect()).unwrap();
        let err = grad_check(&p, mse_closure(&x, &y), 1e-5, 1);
        assert!(err < 1e-8, "max rel err {err}");
    }

    #[test]
    fn relu_net_bce_within_tolerance() {
        let p = MlpParams::init(&[11, 8, 4, 1], 42).unwrap();
        let mut rng = rng_from_seed(3);
        let x = {
            let mut m = Mat::zeros(16, 11);
            for v in m.as_mut_slice() {
                *v = rng.random_range(-1.5..1.5);
            }
            m
        };
        let labels: Vec<f64> = (0..16).map(|i| (i % 2) as f64).collect();
        let f = |p: &MlpParams| {
            let mut r = rng_from_seed(0);
            let trace = forward(p, &x, 0.0, Mode::Eval, &mut r).unwrap();
            let probs: Vec<f64> = trace.output().as_slice().iter().map(|&z| sigmoid(z)).collect();
            let (loss, gl) = bce_loss(&probs, &labels).unwrap();
            let g = Mat::from_vec(16, 1, gl).unwrap();
            let (grads, _) = backward(p, &trace, &g).unwrap();
            (loss, grads)
        };
        let err = grad_check(&p, f, 1e-5, 7);
        assert!(err < 1e-4, "max rel err {err}");
    }

    #[test]
    fn dead_relu_net_agrees_at_zero() {
        // all-negative biases + zero weights: every ReLU is dead, both
        // analytic and numeric gradients vanish for upstream layers
        let mut p = MlpParams::init(&[2, 3, 1], 9).unwrap();
        p.weight_mut(0).as_mut_slice().fill(0.0);
        p.bias_mut(0).iter_mut().for_each(|b| *b = -1.0);
        let x = Mat::from_vec(2, 2, vec![0.3, -0.2, 0.1, 0.4]).unwrap();
        let y = Mat::from_vec(2, 1, vec![1.0, 0.0]).unwrap();
        let err = grad_check(&p, mse_closure(&x, &y), 1e-5, 2);
        assert!(err < 1e-8, "max rel err {err}");
    }
}
