//! Permutation feature importance with percentile CIs.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::classifier::ProbScorer;
use crate::data::Dataset;
use crate::error::Result;
use crate::eval::metrics::auc;
use crate::eval::report::percentile;
use crate::jobs::run_indexed;
use crate::rng::{derive_seed, rng_from_seed, stream};

pub const DEFAULT_N_REPEATS: usize = 100;

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceRow {
    pub feature: String,
    /// Baseline AUC minus mean AUC after shuffling this feature.
    pub importance: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImportanceReport {
    pub baseline_auc: f64,
    pub n_repeats: usize,
    pub seed: u64,
    /// Rows sorted by importance, largest first.
    pub rows: Vec<ImportanceRow>,
}

/// Shuffles each feature column independently `n_repeats` times and records
/// the AUC drop; the CI is the percentile interval over repeats.
pub fn permutation_importance<S: ProbScorer + Sync>(
    scorer: &S,
    data: &Dataset,
    n_repeats: usize,
    seed: u64,
    jobs: usize,
) -> Result<ImportanceReport> {
    let labels = data.labels_f64();
    let baseline = auc(&scorer.predict_proba(&data.features)?, &labels)?;

    let per_feature: Vec<Result<Vec<f64>>> = run_indexed(data.n_features(), jobs, |j| {
        let mut drops = Vec::with_capacity(n_repeats);
        for r in 0..n_repeats {
            let mut rng = rng_from_seed(derive_seed(
                seed,
                stream::IMPORTANCE,
                (j * n_repeats + r) as u64,
            ));
            let mut col = data.features.column(j);
            col.shuffle(&mut rng);
            let mut shuffled = data.features.clone();
            shuffled.set_column(j, &col);
            let a = auc(&scorer.predict_proba(&shuffled)?, &labels)?;
            drops.push(baseline - a);
        }
        Ok(drops)
    });

    let mut rows = Vec::with_capacity(data.n_features());
    for (j, drops) in per_feature.into_iter().enumerate() {
        let drops = drops?;
        let mean = drops.iter().sum::<f64>() / drops.len() as f64;
        rows.push(ImportanceRow {
            feature: data.feature_names[j].clone(),
            importance: mean,
            ci_low: percentile(&drops, 0.025),
            ci_high: percentile(&drops, 0.975),
        });
    }
    rows.sort_by(|a, b| b.importance.partial_cmp(&a.importance).unwrap());
    Ok(ImportanceReport {
        baseline_auc: baseline,
        n_repeats,
        seed,
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::mat::Mat;
    use crate::rng::rng_from_seed;
    use rand::Rng;

    /// Deterministic scorer that reads a single feature.
    struct OneFeature(usize);

    impl ProbScorer for OneFeature {
        fn predict_proba(&self, rows: &Mat) -> std::result::Result<Vec<f64>, Error> {
            Ok((0..rows.rows())
                .map(|i| 1.0 / (1.0 + (-rows.get(i, self.0)).exp()))
                .collect())
        }
    }

    fn two_feature_data(n: usize, seed: u64) -> Dataset {
        // feature 0 drives the outcome; feature 1 is independent noise
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::with_capacity(n);
        let mut outcome = Vec::with_capacity(n);
        for _ in 0..n {
            let x0: f64 = rng.random_range(-2.0..2.0);
            let x1: f64 = rng.random_range(-2.0..2.0);
            outcome.push(u8::from(rng.random::<f64>() < 1.0 / (1.0 + (-2.0 * x0).exp())));
            rows.push(vec![x0, x1]);
        }
        Dataset::new(
            Mat::from_rows(&rows).unwrap(),
            outcome,
            vec!["A".into(); n],
            vec!["R".into(); n],
            (0..n as u64).collect(),
            vec!["signal".into(), "noise".into()],
        )
        .unwrap()
    }

    #[test]
    fn sole_predictor_and_null_feature_behave() {
        let data = two_feature_data(10_000, 3);
        let scorer = OneFeature(0);
        let report = permutation_importance(&scorer, &data, 30, 7, 1).unwrap();
        assert_eq!(report.rows[0].feature, "signal");
        // shuffling the only input drives AUC to ≈ 0.5
        assert!(
            (report.rows[0].importance - (report.baseline_auc - 0.5)).abs() < 0.02,
            "imp {}",
            report.rows[0].importance
        );
        let null = report.rows.iter().find(|r| r.feature == "noise").unwrap();
        assert!(null.importance.abs() < 0.01, "null imp {}", null.importance);
        assert!(null.ci_low <= 0.0 && 0.0 <= null.ci_high);
    }

    #[test]
    fn deterministic_and_jobs_invariant() {
        let data = two_feature_data(800, 5);
        let scorer = OneFeature(0);
        let a = permutation_importance(&scorer, &data, 10, 3, 1).unwrap();
        let b = permutation_importance(&scorer, &data, 10, 3, 4).unwrap();
        for (x, y) in a.rows.iter().zip(&b.rows) {
            assert_eq!(x.feature, y.feature);
            assert_eq!(x.importance, y.importance);
        }
    }
}
