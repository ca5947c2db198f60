//! Bootstrap confidence intervals with country-stratified resampling.

use rand::Rng;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::report::{percentile, EvalReport};
use crate::jobs::run_indexed;
use crate::rng::{derive_seed, rng_from_seed, stream};

pub const DEFAULT_N_RESAMPLES: usize = 1000;
/// Resamples that lose an outcome class are redrawn this many times before
/// the run errors out.
const MAX_REDRAWS: usize = 10;

/// Draws a within-country resample (each country keeps its row count) and
/// redraws up to [`MAX_REDRAWS`] times if the result is single-class.
/// The returned dataset may repeat `row_id`s; that is inherent to
/// resampling with replacement.
pub fn stratified_resample(data: &Dataset, seed: u64) -> Result<Dataset> {
    let mut rng = rng_from_seed(seed);
    let by_country = data.country_indices();
    for _ in 0..=MAX_REDRAWS {
        let mut chosen = Vec::with_capacity(data.n_rows());
        for idx in by_country.values() {
            for _ in 0..idx.len() {
                chosen.push(idx[rng.random_range(0..idx.len())]);
            }
        }
        let resample = data.select(&chosen);
        if resample.has_both_classes() {
            return Ok(resample);
        }
    }
    Err(Error::Data(format!(
        "resample still single-class after {MAX_REDRAWS} redraws"
    )))
}

/// Percentile-bootstrap CI for any train-and-evaluate statistic.
///
/// Per resample: the training data is resampled with replacement stratified
/// by country, then `statistic(resample, fold_seed)` retrains and evaluates
/// — against a test set the closure holds fixed across iterations. The point
/// estimate is the statistic on the un-resampled data.
pub fn bootstrap_ci<F>(
    statistic: F,
    data: &Dataset,
    metric_name: &str,
    n_resamples: usize,
    seed: u64,
    jobs: usize,
) -> Result<EvalReport>
where
    F: Fn(&Dataset, u64) -> Result<f64> + Sync,
{
    if n_resamples == 0 {
        return Err(Error::Config("n_resamples must be >= 1".into()));
    }
    let point = statistic(data, derive_seed(seed, stream::BOOTSTRAP, u64::MAX))?;
    let values: Vec<Result<f64>> = run_indexed(n_resamples, jobs, |i| {
        let fold_seed = derive_seed(seed, stream::BOOTSTRAP, i as u64);
        let resample = stratified_resample(data, fold_seed)?;
        statistic(&resample, fold_seed)
    });
    let mut collected = Vec::with_capacity(n_resamples);
    for v in values {
        collected.push(v?);
    }
    Ok(EvalReport {
        metric: metric_name.to_string(),
        point,
        ci_low: percentile(&collected, 0.025),
        ci_high: percentile(&collected, 0.975),
        n_resamples,
        per_group: Vec::new(),
        seed,
        config: serde_json::json!({ "n_resamples": n_resamples }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{synth_generate, SynthConfig, DEFAULT_COEFFICIENTS};

    fn small_data(seed: u64) -> Dataset {
        synth_generate(&SynthConfig {
            n_countries: 3,
            rows_per_country: 150,
            shared_coefficients: DEFAULT_COEFFICIENTS.to_vec(),
            country_shift_scale: 0.3,
            label_noise: 0.05,
            seed,
            region_map: Default::default(),
        })
        .unwrap()
    }

    #[test]
    fn constant_statistic_gives_degenerate_interval() {
        let data = small_data(1);
        let report =
            bootstrap_ci(|_, _| Ok(0.7), &data, "const", 50, 9, 1).unwrap();
        assert_eq!(report.point, 0.7);
        assert_eq!(report.ci_low, 0.7);
        assert_eq!(report.ci_high, 0.7);
    }

    #[test]
    fn default_resample_count_is_one_thousand() {
        assert_eq!(DEFAULT_N_RESAMPLES, 1000);
    }

    #[test]
    fn resample_preserves_country_counts() {
        let data = small_data(2);
        let r = stratified_resample(&data, 7).unwrap();
        assert_eq!(r.n_rows(), data.n_rows());
        for (c, idx) in data.country_indices() {
            let k = r.country.iter().filter(|&x| *x == c).count();
            assert_eq!(k, idx.len());
        }
    }

    #[test]
    fn jobs_do_not_change_the_report() {
        let data = small_data(3);
        let stat = |d: &Dataset, _s: u64| Ok(d.prevalence());
        let a = bootstrap_ci(stat, &data, "prevalence", 64, 11, 1).unwrap();
        let b = bootstrap_ci(stat, &data, "prevalence", 64, 11, 4).unwrap();
        assert_eq!(a.point, b.point);
        assert_eq!(a.ci_low, b.ci_low);
        assert_eq!(a.ci_high, b.ci_high);
        assert!(a.ci_low <= a.ci_high);
    }

    #[test]
    fn interval_tightens_with_larger_data() {
        let data = small_data(4);
        let stat = |d: &Dataset, _s: u64| Ok(d.prevalence());
        let r = bootstrap_ci(stat, &data, "prevalence", 200, 13, 1).unwrap();
        assert!(r.ci_low < r.point && r.point < r.ci_high);
        assert!(r.ci_high - r.ci_low < 0.2);
    }
}
