//! Core dataset container and the feature schema.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mat::Mat;

/// Predictors, in column order. `wealth_score` (index 2) drives quintiles.
pub const FEATURE_NAMES: [&str; 11] = [
    "child_age",
    "gender",
    "wealth_score",
    "mother_edu_level",
    "urban",
    "stunting_z",
    "underweight_z",
    "diarrhea",
    "fever",
    "books",
    "stimulation_outing",
];

pub const N_FEATURES: usize = 11;
pub const OUTCOME_NAME: &str = "ecdi_on_track";
pub const COUNTRY_COLUMN: &str = "country_code";
pub const REGION_COLUMN: &str = "region";
pub const WEALTH_INDEX: usize = 2;

/// Column names expected on input files.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Schema {
    pub feature_names: Vec<String>,
    pub outcome: String,
    pub country: String,
    pub region: String,
}

impl Default for Schema {
    fn default() -> Self {
        Schema {
            feature_names: FEATURE_NAMES.iter().map(|s| s.to_string()).collect(),
            outcome: OUTCOME_NAME.into(),
            country: COUNTRY_COLUMN.into(),
            region: REGION_COLUMN.into(),
        }
    }
}

/// Feature matrix plus outcome and group labels; the unit every trainer and
/// evaluator consumes. Rows carry a stable `row_id` so split protocols can
/// prove train/testex disjointness.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub features: Mat,
    pub outcome: Vec<u8>,
    pub country: Vec<String>,
    pub region: Vec<String>,
    pub wealth_quintile: Vec<u8>,
    pub row_id: Vec<u64>,
    pub feature_names: Vec<String>,
}

impl Dataset {
    /// Validates lengths and finiteness, then derives wealth quintiles.
    pub fn new(
        features: Mat,
        outcome: Vec<u8>,
        country: Vec<String>,
        region: Vec<String>,
        row_id: Vec<u64>,
        feature_names: Vec<String>,
    ) -> Result<Self> {
        let n = features.rows();
        if outcome.len() != n || country.len() != n || region.len() != n || row_id.len() != n {
            return Err(Error::Shape("column lengths disagree".into()));
        }
        if features.cols() != feature_names.len() {
            return Err(Error::Shape(
                "feature matrix width does not match feature names".into(),
            ));
        }
        if !features.all_finite() {
            return Err(Error::Data(
                "non-finite feature values (run imputation first)".into(),
            ));
        }
        if outcome.iter().any(|&y| y > 1) {
            return Err(Error::Data("outcome must be binary".into()));
        }
        if country.iter().any(|c| c.is_empty()) || region.iter().any(|r| r.is_empty()) {
            return Err(Error::Data("country and region must be non-empty".into()));
        }
        {
            let mut sorted = row_id.clone();
            sorted.sort_unstable();
            sorted.dedup();
            if sorted.len() != n {
                return Err(Error::Data("row_id values must be unique".into()));
            }
        }
        let mut ds = Dataset {
            features,
            outcome,
            country,
            region,
            wealth_quintile: vec![0; n],
            row_id,
            feature_names,
        };
        ds.assign_wealth_quintiles();
        Ok(ds)
    }

    pub fn n_rows(&self) -> usize {
        self.features.rows()
    }

    pub fn n_features(&self) -> usize {
        self.features.cols()
    }

    /// Per-country 20% bins of `wealth_score`; bin sizes differ by at most
    /// one row. Ties break on `row_id` so the assignment is deterministic.
    /// Datasets without a wealth column (reduced test schemas) get a flat
    /// middle quintile.
    fn assign_wealth_quintiles(&mut self) {
        let Some(wealth) = self
            .feature_names
            .iter()
            .position(|f| f == FEATURE_NAMES[WEALTH_INDEX])
        else {
            self.wealth_quintile.fill(3);
            return;
        };
        for idx in self.country_indices().values() {
            let mut order: Vec<usize> = idx.clone();
            order.sort_by(|&a, &b| {
                self.features
                    .get(a, wealth)
                    .partial_cmp(&self.features.get(b, wealth))
                    .unwrap()
                    .then(self.row_id[a].cmp(&self.row_id[b]))
            });
            let n = order.len();
            for (rank, &row) in order.iter().enumerate() {
                self.wealth_quintile[row] = (rank * 5 / n) as u8 + 1;
            }
        }
    }

    /// Sorted country → row indices map.
    pub fn country_indices(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, c) in self.country.iter().enumerate() {
            map.entry(c.clone()).or_default().push(i);
        }
        map
    }

    pub fn countries(&self) -> Vec<String> {
        self.country_indices().into_keys().collect()
    }

    /// Sorted region → row indices map.
    pub fn region_indices(&self) -> BTreeMap<String, Vec<usize>> {
        let mut map: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, r) in self.region.iter().enumerate() {
            map.entry(r.clone()).or_default().push(i);
        }
        map
    }

    /// Copies the given rows into a new dataset (quintiles are preserved,
    /// not recomputed, so subsets keep their population context).
    pub fn select(&self, idx: &[usize]) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            outcome: idx.iter().map(|&i| self.outcome[i]).collect(),
            country: idx.iter().map(|&i| self.country[i].clone()).collect(),
            region: idx.iter().map(|&i| self.region[i].clone()).collect(),
            wealth_quintile: idx.iter().map(|&i| self.wealth_quintile[i]).collect(),
            row_id: idx.iter().map(|&i| self.row_id[i]).collect(),
            feature_names: self.feature_names.clone(),
        }
    }

    pub fn labels_f64(&self) -> Vec<f64> {
        self.outcome.iter().map(|&y| y as f64).collect()
    }

    pub fn prevalence(&self) -> f64 {
        if self.outcome.is_empty() {
            return f64::NAN;
        }
        self.outcome.iter().map(|&y| y as f64).sum::<f64>() / self.outcome.len() as f64
    }

    pub fn has_both_classes(&self) -> bool {
        self.outcome.contains(&0) && self.outcome.contains(&1)
    }
}

/// Per-feature location/scale for z-scoring. Uses the population standard
/// deviation (divisor `n`), fitted once on the pre-training pool and reused
/// downstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Standardizer {
    pub fn fit(features: &Mat) -> Result<Self> {
        let (n, d) = (features.rows(), features.cols());
        if n == 0 {
            return Err(Error::Data("cannot standardize an empty matrix".into()));
        }
        let mut mean = vec![0.0; d];
        for row in features.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n as f64;
        }
        let mut var = vec![0.0; d];
        for row in features.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                let e = v - mean[j];
                var[j] += e * e;
            }
        }
        let mut std = Vec::with_capacity(d);
        for (j, v) in var.iter().enumerate() {
            let s = (v / n as f64).sqrt();
            if s <= 1e-12 {
                return Err(Error::Data(format!(
                    "feature {} has zero variance",
                    FEATURE_NAMES.get(j).copied().unwrap_or("?")
                )));
            }
            std.push(s);
        }
        Ok(Standardizer { mean, std })
    }

    /// Like [`Standardizer::fit`] but a zero-variance column passes through
    /// with unit scale instead of erroring. Used where models standardize
    /// their own (possibly tiny or constant) training sample.
    pub fn fit_lenient(features: &Mat) -> Self {
        let (n, d) = (features.rows(), features.cols());
        let mut mean = vec![0.0; d];
        for row in features.iter_rows() {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v;
            }
        }
        for m in &mut mean {
            *m /= n.max(1) as f64;
        }
        let mut var = vec![0.0; d];
        for row in features.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                let e = v - mean[j];
                var[j] += e * e;
            }
        }
        let std = var
            .iter()
            .map(|v| {
                let s = (v / n.max(1) as f64).sqrt();
                if s <= 1e-12 {
                    1.0
                } else {
                    s
                }
            })
            .collect();
        Standardizer { mean, std }
    }

    pub fn validate(&self) -> Result<()> {
        if self.mean.len() != self.std.len() {
            return Err(Error::Shape("mean/std length mismatch".into()));
        }
        if self.std.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(Error::Data("standardizer std values must be positive".into()));
        }
        Ok(())
    }

    pub fn transform(&self, features: &Mat) -> Result<Mat> {
        if features.cols() != self.mean.len() {
            return Err(Error::Shape(format!(
                "matrix has {} columns, standardizer has {}",
                features.cols(),
                self.mean.len()
            )));
        }
        let mut out = features.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.mean[j]) / self.std[j];
            }
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, features: &Mat) -> Result<Mat> {
        if features.cols() != self.mean.len() {
            return Err(Error::Shape("column count mismatch".into()));
        }
        let mut out = features.clone();
        for i in 0..out.rows() {
            let row = out.row_mut(i);
            for (j, v) in row.iter_mut().enumerate() {
                *v = *v * self.std[j] + self.mean[j];
            }
        }
        Ok(out)
    }
}

/// Country-level quality report produced at ingest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CountryAudit {
    pub country: String,
    pub n_rows: usize,
    pub prevalence: f64,
    pub accepted: bool,
    pub reason: Option<String>,
}

/// Drops countries with fewer than 100 rows or outcome prevalence outside
/// [5%, 95%], returning the filtered dataset and one audit row per country.
pub fn audit_countries(data: &Dataset) -> (Dataset, Vec<CountryAudit>) {
    let mut keep = Vec::new();
    let mut audits = Vec::new();
    for (country, idx) in data.country_indices() {
        let n = idx.len();
        let prev = idx.iter().map(|&i| data.outcome[i] as f64).sum::<f64>() / n as f64;
        let reason = if n < 100 {
            Some(format!("sample size {n} below 100"))
        } else if !(0.05..=0.95).contains(&prev) {
            Some(format!("outcome prevalence {prev:.3} outside [0.05, 0.95]"))
        } else {
            None
        };
        let accepted = reason.is_none();
        if accepted {
            keep.extend_from_slice(&idx);
        }
        audits.push(CountryAudit {
            country,
            n_rows: n,
            prevalence: prev,
            accepted,
            reason,
        });
    }
    keep.sort_unstable();
    (data.select(&keep), audits)
}
