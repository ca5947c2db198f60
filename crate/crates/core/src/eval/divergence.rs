//! Proxy A-distance between two feature distributions.

use rand::seq::SliceRandom;

use crate::baselines::LogRegConfig;
use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::sigmoid;
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Minimum rows per side for the domain classifier to be meaningful.
const MIN_ROWS: usize = 50;
/// Light coupling keeps the domain classifier's optimum finite on
/// separable domains.
const DOMAIN_L2: f64 = 1e-3;

/// Estimates `d̂ = 2·(2·acc − 1)`, clipped to [0, 2], where `acc` is the
/// held-out accuracy of an L2 logistic regression trained to tell source
/// rows from target rows on standardized features.
pub fn proxy_divergence(source: &Mat, target: &Mat, seed: u64) -> Result<f64> {
    if source.cols() != target.cols() {
        return Err(Error::Shape("source/target widths differ".into()));
    }
    if source.rows() < MIN_ROWS || target.rows() < MIN_ROWS {
        return Err(Error::Data(format!(
            "need at least {MIN_ROWS} rows per side, got {} and {}",
            source.rows(),
            target.rows()
        )));
    }

    // stack, standardize on the pooled rows
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(source.rows() + target.rows());
    rows.extend(source.iter_rows().map(|r| r.to_vec()));
    rows.extend(target.iter_rows().map(|r| r.to_vec()));
    let stacked = Mat::from_rows(&rows)?;
    let standardizer = Standardizer::fit_lenient(&stacked);
    let z = standardizer.transform(&stacked)?;
    let labels: Vec<f64> = (0..z.rows())
        .map(|i| f64::from(i >= source.rows()))
        .collect();

    // 50/50 split, stratified by domain
    let mut rng = rng_from_seed(derive_seed(seed, stream::DIVERGENCE, 0));
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (start, len) in [(0usize, source.rows()), (source.rows(), target.rows())] {
        let mut idx: Vec<usize> = (start..start + len).collect();
        idx.shuffle(&mut rng);
        let half = len / 2;
        train_idx.extend_from_slice(&idx[..half]);
        test_idx.extend_from_slice(&idx[half..]);
    }

    let x_train = z.select_rows(&train_idx);
    let y_train: Vec<f64> = train_idx.iter().map(|&i| labels[i]).collect();
    let cfg = LogRegConfig {
        learning_rate: 0.05,
        tolerance: 1e-6,
        max_iterations: 3000,
    };
    let (w, b, _, _) = crate::baselines::fit_logistic_raw(&x_train, &y_train, DOMAIN_L2, &cfg);

    let mut correct = 0.0;
    for &i in &test_idx {
        let zrow = z.row(i);
        let s = zrow.iter().zip(&w).map(|(a, wj)| a * wj).sum::<f64>() + b;
        let pred = f64::from(sigmoid(s) > 0.5);
        if pred == labels[i] {
            correct += 1.0;
        }
    }
    let acc = correct / test_idx.len() as f64;
    Ok((2.0 * (2.0 * acc - 1.0)).clamp(0.0, 2.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn gaussian_block(n: usize, d: usize, mean: f64, seed: u64) -> Mat {
        let mut rng = rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                (0..d)
                    .map(|_| mean + rng.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        Mat::from_rows(&rows).unwrap()
    }

    #[test]
    fn identical_distributions_score_near_zero() {
        let a = gaussian_block(3000, 4, 0.0, 1);
        let b = gaussian_block(3000, 4, 0.0, 2);
        let d = proxy_divergence(&a, &b, 7).unwrap();
        assert!(d < 0.1, "d = {d}");
    }

    #[test]
    fn resample_of_same_rows_scores_near_zero() {
        let a = gaussian_block(2000, 3, 0.3, 3);
        let idx: Vec<usize> = (0..a.rows()).rev().collect();
        let b = a.select_rows(&idx);
        let d = proxy_divergence(&a, &b, 11).unwrap();
        assert!(d < 0.1, "d = {d}");
    }

    #[test]
    fn disjoint_supports_saturate() {
        let a = gaussian_block(1500, 3, 0.0, 5);
        let b = gaussian_block(1500, 3, 10.0, 6);
        let d = proxy_divergence(&a, &b, 13).unwrap();
        assert!(d > 1.8, "d = {d}");
    }

    #[test]
    fn unit_mean_shift_matches_bayes_accuracy() {
        // 1-D N(0,1) vs N(1,1): Bayes accuracy Φ(0.5) ≈ 0.6915 → d̂ ≈ 0.766
        let a = gaussian_block(12_000, 1, 0.0, 7);
        let b = gaussian_block(12_000, 1, 1.0, 8);
        let d = proxy_divergence(&a, &b, 17).unwrap();
        assert!((d - 0.766).abs() < 0.05, "d = {d}");
    }

    #[test]
    fn deterministic_in_seed_and_too_small_inputs_error() {
        let a = gaussian_block(200, 2, 0.0, 9);
        let b = gaussian_block(200, 2, 0.5, 10);
        assert_eq!(
            proxy_divergence(&a, &b, 3).unwrap(),
            proxy_divergence(&a, &b, 3).unwrap()
        );
        let tiny = gaussian_block(10, 2, 0.0, 11);
        assert!(proxy_divergence(&tiny, &b, 3).is_err());
    }
}
