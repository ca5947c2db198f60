//! Leave-one-country-out validation.

use std::collections::BTreeSet;

use serde::Serialize;

use crate::data::{country_split, Dataset};
use crate::error::{Error, Result};
use crate::jobs::run_indexed;
use crate::rng::{derive_seed, stream};

#[derive(Debug, Clone, Serialize)]
pub struct LocoRow {
    pub country: String,
    pub n_train: usize,
    pub n_test: usize,
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

/// One fold per country: train on all others, score on the held-out one.
///
/// Fold disjointness is proven per fold by `row_id` intersection (inside
/// [`country_split`]); a held-out country with a single outcome class is
/// reported with its AUC flagged undefined rather than failing the run.
pub fn loco_run<F>(trainer: F, data: &Dataset, seed: u64, jobs: usize) -> Result<Vec<LocoRow>>
where
    F: Fn(&Dataset, &Dataset, u64) -> Result<f64> + Sync,
{
    let countries = data.countries();
    if countries.len() < 2 {
        return Err(Error::Data("LOCO needs at least 2 countries".into()));
    }
    let rows: Vec<Result<LocoRow>> = run_indexed(countries.len(), jobs, |i| {
        let country = &countries[i];
        let held: BTreeSet<String> = [country.clone()].into();
        let (train, test) = country_split(data, &held)?;
        if !test.has_both_classes() {
            return Ok(LocoRow {
                country: country.clone(),
                n_train: train.n_rows(),
                n_test: test.n_rows(),
                auc: None,
                flag: Some("AUC undefined: held-out country has a single class".into()),
            });
        }
        let fold_seed = derive_seed(seed, stream::FOLD, i as u64);
        let auc = trainer(&train, &test, fold_seed)?;
        Ok(LocoRow {
            country: country.clone(),
            n_train: train.n_rows(),
            n_test: test.n_rows(),
            auc: Some(auc),
            flag: None,
        })
    });
    rows.into_iter().collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::baselines::{train_logreg, LogRegConfig};
    use crate::data::{synth_generate, SynthConfig, DEFAULT_COEFFICIENTS};
    use crate::eval::auc;

    fn data(n_countries: usize) -> Dataset {
        synth_generate(&SynthConfig {
            n_countries,
            rows_per_country: 150,
            shared_coefficients: DEFAULT_COEFFICIENTS.to_vec(),
            country_shift_scale: 0.2,
            label_noise: 0.05,
            seed: 5,
            region_map: Default::default(),
        })
        .unwrap()
    }

    #[test]
    fn two_countries_give_two_crossed_folds() {
        let ds = data(2);
        let rows = loco_run(
            |train, test, _| {
                // each fold must train on exactly the other country
                assert_eq!(train.countries().len(), 1);
                assert_eq!(test.countries().len(), 1);
                assert_ne!(train.countries(), test.countries());
                let m = train_logreg(train, 1e-3, &LogRegConfig::default())?;
                auc(&m.predict_proba(&test.features)?, &test.labels_f64())
            },
            &ds,
            3,
            1,
        )
        .unwrap();
        assert_eq!(rows.len(), 2);
        assert!(rows.iter().all(|r| r.auc.is_some()));
    }

    #[test]
    fn single_class_country_is_flagged_not_fatal() {
        let mut ds = data(3);
        for (i, c) in ds.country.iter().enumerate() {
            if c == "C01" {
                ds.outcome[i] = 1;
            }
        }
        let rows = loco_run(|_, _, _| Ok(0.8), &ds, 1, 1).unwrap();
        let flagged = rows.iter().find(|r| r.country == "C01").unwrap();
        assert!(flagged.auc.is_none());
        assert!(flagged.flag.is_some());
        assert_eq!(rows.iter().filter(|r| r.auc.is_some()).count(), 2);
    }

    #[test]
    fn folds_partition_the_data() {
        let ds = data(4);
        let n = ds.n_rows();
        let rows = loco_run(
            |train, test, _| {
                assert_eq!(train.n_rows() + test.n_rows(), n);
                Ok(0.5)
            },
            &ds,
            1,
            1,
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        let tested: usize = rows.iter().map(|r| r.n_test).sum();
        assert_eq!(tested, n);
    }

    #[test]
    fn jobs_do_not_change_fold_results() {
        let ds = data(4);
        let trainer = |train: &Dataset, test: &Dataset, s: u64| {
            let _ = s;
            let m = train_logreg(train, 1e-3, &LogRegConfig::default())?;
            auc(&m.predict_proba(&test.features)?, &test.labels_f64())
        };
        let a = loco_run(trainer, &ds, 7, 1).unwrap();
        let b = loco_run(trainer, &ds, 7, 3).unwrap();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x.auc, y.auc);
        }
    }
}
