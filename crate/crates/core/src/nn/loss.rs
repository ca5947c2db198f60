//! Reconstruction and classification losses.

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Probabilities are clamped to this band before any `ln`.
pub const PROB_CLAMP: f64 = 1e-7;

/// Boolean matrix marking which cells count as reconstruction targets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    rows: usize,
    cols: usize,
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(rows: usize, cols: usize) -> Self {
        Mask {
            rows,
            cols,
            bits: vec![false; rows * cols],
        }
    }

    /// Builds a mask from per-row masked index lists.
    pub fn from_row_indices(rows: usize, cols: usize, indices: &[Vec<usize>]) -> Result<Self> {
        if indices.len() != rows {
            return Err(Error::Shape("one index list per row required".into()));
        }
        let mut m = Mask::new(rows, cols);
        for (i, idx) in indices.iter().enumerate() {
            for &j in idx {
                if j >= cols {
                    return Err(Error::Shape(format!(
                        "masked index {j} out of range for {cols} columns"
                    )));
                }
                m.bits[i * cols + j] = true;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        self.bits[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: bool) {
        self.bits[i * self.cols + j] = v;
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub(crate) fn bits(&self) -> &[bool] {
        &self.bits
    }
}

/// Mean squared error over masked cells only.
///
/// `loss = Σ_masked (target − pred)² / |M|`; the gradient is
/// `2(pred − target)/|M|` on masked cells and exactly zero elsewhere, so
/// unmasked coordinates can never influence training.
pub fn mse_masked_loss(pred: &Mat, target: &Mat, mask: &Mask) -> Result<(f64, Mat)> {
    if pred.rows() != target.rows()
        || pred.cols() != target.cols()
        || mask.rows() != pred.rows()
        || mask.cols() != pred.cols()
    {
        return Err(Error::Shape(
            "pred, target, and mask must share a shape".into(),
        ));
    }
    let m = mask.count();
    if m == 0 {
        return Err(Error::Config(
            "masked MSE undefined for an empty mask".into(),
        ));
    }
    let denom = m as f64;
    let mut loss = 0.0;
    let mut grad = Mat::zeros(pred.rows(), pred.cols());
    let (p, t, g) = (pred.as_slice(), target.as_slice(), grad.as_mut_slice());
    for (k, &masked) in mask.bits().iter().enumerate() {
        if masked {
            let e = p[k] - t[k];
            loss += e * e;
            g[k] = 2.0 * e / denom;
        }
    }
    Ok((loss / denom, grad))
}

/// Mean binary cross-entropy.
///
/// Returns the loss and the gradient with respect to the pre-sigmoid logits,
/// `(p − y)/n`, which is what the training loop backpropagates.
pub fn bce_loss(probabilities: &[f64], labels: &[f64]) -> Result<(f64, Vec<f64>)> {
    if probabilities.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} probabilities vs {} labels",
            probabilities.len(),
            labels.len()
        )));
    }
    if probabilities.is_empty() {
        return Err(Error::Config("empty batch".into()));
    }
    let n = probabilities.len() as f64;
    let mut loss = 0.0;
    let mut grad = Vec::with_capacity(probabilities.len());
    for (&p, &y) in probabilities.iter().zip(labels) {
        if y != 0.0 && y != 1.0 {
            return Err(Error::Data(format!("label {y} is not binary")));
        }
        let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
        loss -= y * pc.ln() + (1.0 - y) * (1.0 - pc).ln();
        grad.push((pc - y) / n);
    }
    Ok((loss / n, grad))
}

#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Inverse sigmoid on a clamped probability.
pub fn logit(p: f64) -> f64 {
    let pc = p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
    (pc / (1.0 - pc)).ln()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_reconstruction_is_zero() {
        let m = Mat::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let mut mask = Mask::new(2, 2);
        mask.set(0, 0, true);
        mask.set(1, 1, true);
        let (loss, grad) = mse_masked_loss(&m, &m, &mask).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grad.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn single_masked_cell_arithmetic() {
        // target 2, pred 0 → loss 4, grad d/dpred = 2(0−2)/1 = −4
        let pred = Mat::from_vec(1, 2, vec![0.0, 9.0]).unwrap();
        let target = Mat::from_vec(1, 2, vec![2.0, -9.0]).unwrap();
        let mut mask = Mask::new(1, 2);
        mask.set(0, 0, true);
        let (loss, grad) = mse_masked_loss(&pred, &target, &mask).unwrap();
        assert_eq!(loss, 4.0);
        assert_eq!(grad.get(0, 0), -4.0);
        assert_eq!(grad.get(0, 1), 0.0);
    }

    #[test]
    fn two_masked_cells_average() {
        // errors 1 and 3 → (1 + 9)/2 = 5
        let pred = Mat::from_vec(1, 3, vec![1.0, 0.0, 0.0]).unwrap();
        let target = Mat::from_vec(1, 3, vec![0.0, 3.0, 100.0]).unwrap();
        let mut mask = Mask::new(1, 3);
        mask.set(0, 0, true);
        mask.set(0, 1, true);
        let (loss, _) = mse_masked_loss(&pred, &target, &mask).unwrap();
        assert_eq!(loss, 5.0);
    }

    #[test]
    fn empty_mask_is_an_error() {
        let m = Mat::zeros(2, 2);
        let mask = Mask::new(2, 2);
        assert!(mse_masked_loss(&m, &m, &mask).is_err());
    }

    #[test]
    fn unmasked_cells_never_affect_loss() {
        let pred = Mat::from_vec(1, 2, vec![1.0, 5.0]).unwrap();
        let mut pred2 = pred.clone();
        pred2.set(0, 1, -100.0);
        let target = Mat::from_vec(1, 2, vec![0.0, 0.0]).unwrap();
        let mut mask = Mask::new(1, 2);
        mask.set(0, 0, true);
        let (a, _) = mse_masked_loss(&pred, &target, &mask).unwrap();
        let (b, _) = mse_masked_loss(&pred2, &target, &mask).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn bce_half_prob_is_ln2() {
        let (loss, _) = bce_loss(&[0.5, 0.5, 0.5], &[1.0, 0.0, 1.0]).unwrap();
        assert!((loss - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn bce_exact_prediction_is_near_zero() {
        let (loss, _) = bce_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap();
        assert!(loss < 1e-6);
    }

    #[test]
    fn bce_hand_arithmetic() {
        // p=[0.9,0.1], y=[1,0] → −(ln 0.9 + ln 0.9)/2 = −ln 0.9
        let (loss, grad) = bce_loss(&[0.9, 0.1], &[1.0, 0.0]).unwrap();
        assert!((loss - (-(0.9f64).ln())).abs() < 1e-12);
        assert!((grad[0] - (0.9 - 1.0) / 2.0).abs() < 1e-15);
        assert!((grad[1] - (0.1 - 0.0) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn bce_rejects_non_binary_labels() {
        assert!(bce_loss(&[0.5], &[0.5]).is_err());
    }

    #[test]
    fn sigmoid_logit_round_trip() {
        for &p in &[0.01, 0.3, 0.5, 0.9, 0.999] {
            assert!((sigmoid(logit(p)) - p).abs() < 1e-12);
        }
    }
}
