//! L2-regularized logistic regression, fitted full-batch with Adam.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::sigmoid;

pub const LOGREG_FORMAT_VERSION: &str = "1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    /// Full-batch Adam step size.
    pub learning_rate: f64,
    /// Stop once the full objective gradient norm falls below this.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            learning_rate: 0.05,
            tolerance: 1e-6,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub format_version: String,
    pub weights: Vec<f64>,
    pub bias: f64,
    pub standardizer: Standardizer,
    pub l2: f64,
    pub converged: bool,
    pub iterations: usize,
    pub gradient_norm: f64,
}

impl LogRegModel {
    pub fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        if rows.cols() != self.weights.len() {
            return Err(Error::Schema(format!(
                "expected {} features, got {}",
                self.weights.len(),
                rows.cols()
            )));
        }
        let x = self.standardizer.transform(rows)?;
        Ok((0..x.rows())
            .map(|i| {
                let z = x
                    .row(i)
                    .iter()
                    .zip(&self.weights)
                    .map(|(a, w)| a * w)
                    .sum::<f64>()
                    + self.bias;
                sigmoid(z)
            })
            .collect())
    }
}

impl crate::classifier::ProbScorer for LogRegModel {
    fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        LogRegModel::predict_proba(self, rows)
    }
}

/// Objective: mean BCE + (l2/2)·‖w‖² (bias unpenalized). Returns
/// `(weights, bias, iterations, gradient_norm)`; callers check convergence
/// against the config tolerance.
pub(crate) fn fit_logistic(
    x: &Mat,
    y: &[f64],
    l2: f64,
    cfg: &LogRegConfig,
) -> (Vec<f64>, f64, usize, f64) {
    let (n, d) = (x.rows(), x.cols());
    let nf = n as f64;
    let mut w = vec![0.0; d];
    let mut b = 0.0;
    let (mut m_w, mut v_w) = (vec![0.0; d], vec![0.0; d]);
    let (mut m_b, mut v_b) = (0.0, 0.0);
    let (beta1, beta2, eps): (f64, f64, f64) = (0.9, 0.999, 1e-8);

    let mut grad_norm = f64::INFINITY;
    let mut iters = 0;
    for t in 1..=cfg.max_iterations {
        let mut gw = vec![0.0; d];
        let mut gb = 0.0;
        for i in 0..n {
            let row = x.row(i);
            let z = row.iter().zip(&w).map(|(a, wj)| a * wj).sum::<f64>() + b;
            let e = (sigmoid(z) - y[i]) / nf;
            for (g, &a) in gw.iter_mut().zip(row) {
                *g += e * a;
            }
            gb += e;
        }
        for (g, &wj) in gw.iter_mut().zip(&w) {
            *g += l2 * wj;
        }
        grad_norm = (gw.iter().map(|g| g * g).sum::<f64>() + gb * gb).sqrt();
        iters = t;
        if grad_norm < cfg.tolerance {
            break;
        }
        let bc1 = 1.0 - beta1.powi(t as i32);
        let bc2 = 1.0 - beta2.powi(t as i32);
        for j in 0..d {
            m_w[j] = beta1 * m_w[j] + (1.0 - beta1) * gw[j];
            v_w[j] = beta2 * v_w[j] + (1.0 - beta2) * gw[j] * gw[j];
            w[j] -= cfg.learning_rate * (m_w[j] / bc1) / ((v_w[j] / bc2).sqrt() + eps);
        }
        m_b = beta1 * m_b + (1.0 - beta1) * gb;
        v_b = beta2 * v_b + (1.0 - beta2) * gb * gb;
        b -= cfg.learning_rate * (m_b / bc1) / ((v_b / bc2).sqrt() + eps);
    }
    (w, b, iters, grad_norm)
}

/// Fits on the dataset's features (standardized internally, lenient on
/// constant columns).
pub fn train_logreg(train: &Dataset, l2: f64, cfg: &LogRegConfig) -> Result<LogRegModel> {
    if l2 < 0.0 {
        return Err(Error::Config("l2 must be non-negative".into()));
    }
    if train.n_rows() == 0 {
        return Err(Error::Data("empty training set".into()));
    }
    let standardizer = Standardizer::fit_lenient(&train.features);
    let x = standardizer.transform(&train.features)?;
    let y = train.labels_f64();
    let (weights, bias, iterations, gradient_norm) = fit_logistic(&x, &y, l2, cfg);
    Ok(LogRegModel {
        format_version: LOGREG_FORMAT_VERSION.into(),
        weights,
        bias,
        standardizer,
        l2,
        converged: gradient_norm < cfg.tolerance,
        iterations,
        gradient_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    fn dataset_from(rows: Vec<Vec<f64>>, outcome: Vec<u8>) -> Dataset {
        let n = rows.len();
        let d = rows[0].len();
        Dataset::new(
            Mat::from_rows(&rows).unwrap(),
            outcome,
            vec!["A".into(); n],
            vec!["R".into(); n],
            (0..n as u64).collect(),
            (0..d).map(|j| format!("f{j}")).collect(),
        )
        .unwrap()
    }

    #[test]
    fn huge_l2_shrinks_to_prevalence() {
        let mut rng = rng_from_seed(3);
        let rows: Vec<Vec<f64>> = (0..200).map(|_| vec![rng.random_range(-1.0..1.0)]).collect();
        let outcome: Vec<u8> = (0..200).map(|i| u8::from(i % 4 != 0)).collect();
        let ds = dataset_from(rows, outcome);
        let m = train_logreg(&ds, 1e6, &LogRegConfig::default()).unwrap();
        assert!(m.weights[0].abs() < 1e-4, "w = {}", m.weights[0]);
        let p = m.predict_proba(&ds.features).unwrap();
        for v in p {
            assert!((v - 0.75).abs() < 0.01, "p = {v}");
        }
    }

    #[test]
    fn separable_single_feature_gets_auc_one() {
        let rows: Vec<Vec<f64>> = (0..80).map(|i| vec![i as f64 - 39.5]).collect();
        let outcome: Vec<u8> = (0..80).map(|i| u8::from(i >= 40)).collect();
        let ds = dataset_from(rows, outcome);
        let m = train_logreg(&ds, 1e-4, &LogRegConfig::default()).unwrap();
        let p = m.predict_proba(&ds.features).unwrap();
        assert_eq!(auc(&p, &ds.labels_f64()).unwrap(), 1.0);
    }

    #[test]
    fn two_point_problem_matches_bisection_oracle() {
        // x = ∓1 (already standardized), y = {0, 1}, l2 = 0.5; by symmetry
        // bias = 0 and the optimal weight solves sigmoid(-w) = l2·w
        let ds = dataset_from(vec![vec![-1.0], vec![1.0]], vec![0, 1]);
        let l2 = 0.5;
        let cfg = LogRegConfig {
            tolerance: 1e-9,
            max_iterations: 50_000,
            ..LogRegConfig::default()
        };
        let m = train_logreg(&ds, l2, &cfg).unwrap();
        assert!(m.converged);

        let f = |w: f64| sigmoid(-w) - l2 * w;
        let (mut lo, mut hi) = (0.0, 10.0);
        for _ in 0..200 {
            let mid = (lo + hi) / 2.0;
            if f(mid) > 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let oracle = (lo + hi) / 2.0;
        assert!(
            (m.weights[0] - oracle).abs() < 1e-6,
            "{} vs {oracle}",
            m.weights[0]
        );
        assert!(m.bias.abs() < 1e-6);
    }

    #[test]
    fn gradient_norm_is_reported() {
        let mut rng = rng_from_seed(7);
        let rows: Vec<Vec<f64>> = (0..150)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let outcome: Vec<u8> = rows
            .iter()
            .map(|r| u8::from(r[0] - r[1] + rng.random_range(-0.3..0.3) > 0.0))
            .collect();
        let ds = dataset_from(rows, outcome);
        let m = train_logreg(&ds, 0.01, &LogRegConfig::default()).unwrap();
        assert!(m.converged);
        assert!(m.gradient_norm < 1e-6);
        assert!(m.iterations <= 10_000);
    }
}
