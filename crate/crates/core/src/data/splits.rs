//! Split protocols: stratified holdout, country holdout, few-shot sampling.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;

use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_from_seed, stream};

/// Holds out `fraction` of each country's rows (rounded per country, so the
/// split preserves country proportions within one row). Returns
/// `(train, test)`.
pub fn stratified_holdout(data: &Dataset, fraction: f64, seed: u64) -> Result<(Dataset, Dataset)> {
    if !(0.0..1.0).contains(&fraction) || fraction <= 0.0 {
        return Err(Error::Config(format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut train_idx = Vec::new();
    let mut test_idx = Vec::new();
    for (ci, (_, mut idx)) in data.country_indices().into_iter().enumerate() {
        let mut rng = rng_from_seed(derive_seed(seed, stream::SPLIT, ci as u64));
        idx.shuffle(&mut rng);
        let n_test = ((idx.len() as f64) * fraction).round() as usize;
        let n_test = n_test.min(idx.len());
        test_idx.extend_from_slice(&idx[..n_test]);
        train_idx.extend_from_slice(&idx[n_test..]);
    }
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Data("holdout produced an empty side".into()));
    }
    train_idx.sort_unstable();
    test_idx.sort_unstable();
    Ok((data.select(&train_idx), data.select(&test_idx)))
}

/// Puts every row of the named countries in `test`, the rest in `train`,
/// and proves the two sides share no `row_id`.
pub fn country_split(data: &Dataset, held_out: &BTreeSet<String>) -> Result<(Dataset, Dataset)> {
    let known: BTreeSet<String> = data.countries().into_iter().collect();
    for c in held_out {
        if !known.contains(c) {
            return Err(Error::Data(format!("unknown country {c}")));
        }
    }
    let (mut train_idx, mut test_idx) = (Vec::new(), Vec::new());
    for i in 0..data.n_rows() {
        if held_out.contains(&data.country[i]) {
            test_idx.push(i);
        } else {
            train_idx.push(i);
        }
    }
    if train_idx.is_empty() || test_idx.is_empty() {
        return Err(Error::Data(
            "country split left one side empty".into(),
        ));
    }
    let train = data.select(&train_idx);
    let test = data.select(&test_idx);
    let train_ids: BTreeSet<u64> = train.row_id.iter().copied().collect();
    if test.row_id.iter().any(|id| train_ids.contains(id)) {
        return Err(Error::Data("row_id leak between train and test".into()));
    }
    Ok((train, test))
}

/// Uniform sample without replacement of `n` rows from one country.
pub fn fewshot_sample(data: &Dataset, country: &str, n: usize, seed: u64) -> Result<Dataset> {
    let idx = data
        .country_indices()
        .remove(country)
        .ok_or_else(|| Error::Data(format!("unknown country {country}")))?;
    if n == 0 {
        return Err(Error::Config("sample size must be >= 1".into()));
    }
    if n > idx.len() {
        return Err(Error::Data(format!(
            "requested {n} rows from {country} but only {} available",
            idx.len()
        )));
    }
    let mut rng = rng_from_seed(derive_seed(seed, stream::FEWSHOT, 0));
    let mut pool = idx;
    pool.shuffle(&mut rng);
    let mut chosen = pool[..n].to_vec();
    chosen.sort_unstable();
    Ok(data.select(&chosen))
}

/// Index split of binary labels with per-class proportions preserved;
/// returns `(rest, held)` where `held` gets `fraction` of each class
/// (clamped so both sides keep at least one member of every class).
pub fn stratified_split_binary(
    labels: &[u8],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<usize>, Vec<usize>)> {
    let mut rng = rng_from_seed(derive_seed(seed, stream::SPLIT, u64::MAX));
    let mut rest = Vec::new();
    let mut held = Vec::new();
    for class in [0u8, 1u8] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if idx.is_empty() {
            continue;
        }
        if idx.len() < 2 {
            return Err(Error::Data(format!(
                "class {class} has a single member; cannot split"
            )));
        }
        idx.shuffle(&mut rng);
        let n_held = ((idx.len() as f64) * fraction).round() as usize;
        let n_held = n_held.clamp(1, idx.len() - 1);
        held.extend_from_slice(&idx[..n_held]);
        rest.extend_from_slice(&idx[n_held..]);
    }
    rest.sort_unstable();
    held.sort_unstable();
    Ok((rest, held))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::synth::{synth_generate, SynthConfig, DEFAULT_COEFFICIENTS};

    fn data() -> Dataset {
        synth_generate(&SynthConfig {
            n_countries: 4,
            rows_per_country: 250,
            shared_coefficients: DEFAULT_COEFFICIENTS.to_vec(),
            country_shift_scale: 0.3,
            label_noise: 0.05,
            seed: 3,
            region_map: Default::default(),
        })
        .unwrap()
    }

    #[test]
    fn stratified_holdout_preserves_country_proportions() {
        let ds = data();
        let (train, test) = stratified_holdout(&ds, 0.2, 9).unwrap();
        assert_eq!(train.n_rows() + test.n_rows(), ds.n_rows());
        for (c, idx) in ds.country_indices() {
            let n_test = test.country.iter().filter(|&x| *x == c).count();
            let expect = (idx.len() as f64 * 0.2).round() as usize;
            assert!(
                (n_test as i64 - expect as i64).abs() <= 1,
                "{c}: {n_test} vs {expect}"
            );
        }
    }

    #[test]
    fn country_split_is_disjoint_and_exhaustive() {
        let ds = data();
        let held: BTreeSet<String> = ["C02".to_string()].into();
        let (train, test) = country_split(&ds, &held).unwrap();
        assert_eq!(train.n_rows() + test.n_rows(), ds.n_rows());
        assert!(test.country.iter().all(|c| c == "C02"));
        assert!(train.country.iter().all(|c| c != "C02"));
        let train_ids: BTreeSet<u64> = train.row_id.iter().copied().collect();
        let test_ids: BTreeSet<u64> = test.row_id.iter().copied().collect();
        assert!(train_ids.is_disjoint(&test_ids));
        assert_eq!(train_ids.len() + test_ids.len(), ds.n_rows());
    }

    #[test]
    fn fewshot_sample_exact_count_and_source() {
        let ds = data();
        let s = fewshot_sample(&ds, "C01", 50, 4).unwrap();
        assert_eq!(s.n_rows(), 50);
        assert!(s.country.iter().all(|c| c == "C01"));
        // distinct rows
        let ids: BTreeSet<u64> = s.row_id.iter().copied().collect();
        assert_eq!(ids.len(), 50);
        // deterministic
        let s2 = fewshot_sample(&ds, "C01", 50, 4).unwrap();
        assert_eq!(s, s2);
        let s3 = fewshot_sample(&ds, "C01", 50, 5).unwrap();
        assert_ne!(s, s3);
    }

    #[test]
    fn fewshot_sample_rejects_oversized_requests() {
        let ds = data();
        assert!(fewshot_sample(&ds, "C01", 251, 4).is_err());
        assert!(fewshot_sample(&ds, "NOPE", 10, 4).is_err());
    }

    #[test]
    fn binary_split_keeps_both_classes() {
        let labels: Vec<u8> = (0..50).map(|i| u8::from(i % 10 == 0)).collect();
        let (rest, held) = stratified_split_binary(&labels, 0.2, 1).unwrap();
        assert_eq!(rest.len() + held.len(), 50);
        assert!(held.iter().any(|&i| labels[i] == 1));
        assert!(rest.iter().any(|&i| labels[i] == 1));
        assert!(held.iter().any(|&i| labels[i] == 0));
    }
}
