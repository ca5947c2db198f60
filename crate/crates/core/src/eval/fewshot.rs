//! Regional few-shot transfer protocol.
//!
//! Fine-tune the pre-trained encoder on N samples from one target-region
//! country, train the cold-start baselines on the same N rows, and evaluate
//! everything on the remaining target-region countries.

use serde::Serialize;

use crate::baselines::{train_cold_mlp, train_gbdt, GbdtConfig};
use crate::classifier::{finetune, ClassifierModel, FinetuneConfig};
use crate::data::{fewshot_sample, stratified_split_binary, Dataset};
use crate::error::{Error, Result};
use crate::eval::metrics::auc;
use crate::eval::ttest::paired_ttest;
use crate::jobs::run_indexed;
use crate::rng::{derive_seed, stream};
use crate::tmae::EncoderCheckpoint;

pub const DEFAULT_FEWSHOT_SIZES: [usize; 7] = [50, 100, 200, 500, 1000, 2000, 5000];
pub const DEFAULT_FEWSHOT_SEEDS: usize = 10;

pub const MODEL_PRETRAINED: &str = "pretrained";
pub const MODEL_COLD_MLP: &str = "cold_mlp";
pub const MODEL_COLD_GBDT: &str = "cold_gbdt";

#[derive(Debug, Clone)]
pub struct FewShotConfig {
    pub sizes: Vec<usize>,
    pub n_seeds: usize,
    pub seed: u64,
    pub finetune: FinetuneConfig,
    pub gbdt: GbdtConfig,
    /// Fraction of each N-sample carved off for early stopping.
    pub val_fraction: f64,
}

impl Default for FewShotConfig {
    fn default() -> Self {
        FewShotConfig {
            sizes: DEFAULT_FEWSHOT_SIZES.to_vec(),
            n_seeds: DEFAULT_FEWSHOT_SEEDS,
            seed: 42,
            finetune: FinetuneConfig::default(),
            gbdt: GbdtConfig::default(),
            val_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FewShotPoint {
    pub model: String,
    pub n: usize,
    pub seed_index: usize,
    pub auc: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeSummary {
    pub n: usize,
    pub pretrained_mean: f64,
    pub pretrained_sd: f64,
    pub cold_mlp_mean: f64,
    pub cold_mlp_sd: f64,
    pub cold_gbdt_mean: f64,
    pub cold_gbdt_sd: f64,
    /// Pre-trained minus baseline mean AUC, and the same as a relative
    /// ratio (mean_pre/mean_baseline − 1); both are reported so "gain" is
    /// never ambiguous.
    pub gain_abs_vs_mlp: f64,
    pub gain_rel_vs_mlp: f64,
    pub gain_abs_vs_gbdt: f64,
    pub gain_rel_vs_gbdt: f64,
    /// Seeds where the pre-trained model beats the baseline (ties count ½).
    /// Win counts need at least 10 seeds to mean anything, so they are
    /// absent on smaller runs.
    pub wins_vs_mlp: Option<f64>,
    pub wins_vs_gbdt: Option<f64>,
    pub p_vs_mlp: f64,
    pub p_vs_gbdt: f64,
}

/// Minimum seed count before win-count rows are reported.
pub const MIN_SEEDS_FOR_WINS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct SkippedSize {
    pub n: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct FewShotCurve {
    pub target_country: String,
    pub eval_countries: Vec<String>,
    pub sizes: Vec<usize>,
    pub n_seeds: usize,
    pub points: Vec<FewShotPoint>,
    pub summaries: Vec<SizeSummary>,
    pub skipped: Vec<SkippedSize>,
}

impl FewShotCurve {
    /// `model,n,seed,auc` rows for external plotting.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("model,n,seed,auc\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{},{}\n", p.model, p.n, p.seed_index, p.auc));
        }
        out
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn wins(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            if x > y {
                1.0
            } else if x == y {
                0.5
            } else {
                0.0
            }
        })
        .sum()
}

/// Runs the protocol. The evaluation pool is every row whose region matches
/// the target country's region, excluding the target country itself.
/// Requested sizes larger than the target country are skipped with a note.
pub fn fewshot_curve(
    ckpt: &EncoderCheckpoint,
    data: &Dataset,
    target_country: &str,
    cfg: &FewShotConfig,
    jobs: usize,
) -> Result<FewShotCurve> {
    if cfg.n_seeds == 0 {
        return Err(Error::Config("n_seeds must be >= 1".into()));
    }
    let by_country = data.country_indices();
    let target_rows = by_country
        .get(target_country)
        .ok_or_else(|| Error::Data(format!("unknown target country {target_country}")))?;
    let target_region = data.region[target_rows[0]].clone();

    let eval_idx: Vec<usize> = (0..data.n_rows())
        .filter(|&i| data.region[i] == target_region && data.country[i] != target_country)
        .collect();
    if eval_idx.is_empty() {
        return Err(Error::Data(format!(
            "target region {target_region:?} has no countries besides {target_country}"
        )));
    }
    let eval_set = data.select(&eval_idx);
    if !eval_set.has_both_classes() {
        return Err(Error::Data("evaluation pool has a single class".into()));
    }
    let eval_labels = eval_set.labels_f64();

    let mut sizes = Vec::new();
    let mut skipped = Vec::new();
    for &n in &cfg.sizes {
        if n > target_rows.len() {
            skipped.push(SkippedSize {
                n,
                reason: format!(
                    "{target_country} has only {} rows; size skipped",
                    target_rows.len()
                ),
            });
        } else {
            sizes.push(n);
        }
    }

    // one job per (size, seed) cell; each returns the three model AUCs
    let cells: Vec<(usize, usize)> = sizes
        .iter()
        .enumerate()
        .flat_map(|(si, _)| (0..cfg.n_seeds).map(move |s| (si, s)))
        .collect();
    let results: Vec<Result<[f64; 3]>> = run_indexed(cells.len(), jobs, |k| {
        let (si, s) = cells[k];
        let n = sizes[si];
        let cell_seed = derive_seed(cfg.seed, stream::FEWSHOT, (si * 100_000 + s) as u64);
        let sample = fewshot_sample(data, target_country, n, cell_seed)?;
        let (train_idx, val_idx) =
            stratified_split_binary(&sample.outcome, cfg.val_fraction, cell_seed)?;
        let train = sample.select(&train_idx);
        let val = sample.select(&val_idx);

        let mut ft = cfg.finetune.clone();
        ft.seed = cell_seed;
        let model = ClassifierModel::init_from_encoder(ckpt, &ft)?;
        let fitted = finetune(model, &train, &val, &ft)?;
        let auc_pre = auc(&fitted.predict_proba(&eval_set.features)?, &eval_labels)?;

        let mlp = train_cold_mlp(&train, &val, &ft)?;
        let auc_mlp = auc(&mlp.predict_proba(&eval_set.features)?, &eval_labels)?;

        let mut gb = cfg.gbdt.clone();
        gb.seed = cell_seed;
        let gbdt = train_gbdt(&train, Some(&val), &gb)?;
        let auc_gbdt = auc(&gbdt.predict_proba(&eval_set.features)?, &eval_labels)?;

        Ok([auc_pre, auc_mlp, auc_gbdt])
    });

    let mut points = Vec::new();
    let mut summaries = Vec::new();
    for (si, &n) in sizes.iter().enumerate() {
        let mut pre = Vec::with_capacity(cfg.n_seeds);
        let mut mlp = Vec::with_capacity(cfg.n_seeds);
        let mut gbdt = Vec::with_capacity(cfg.n_seeds);
        for s in 0..cfg.n_seeds {
            let k = si * cfg.n_seeds + s;
            let cell = results[k].as_ref().map_err(|e| Error::Data(e.to_string()))?;
            pre.push(cell[0]);
            mlp.push(cell[1]);
            gbdt.push(cell[2]);
            points.push(FewShotPoint {
                model: MODEL_PRETRAINED.into(),
                n,
                seed_index: s,
                auc: cell[0],
            });
            points.push(FewShotPoint {
                model: MODEL_COLD_MLP.into(),
                n,
                seed_index: s,
                auc: cell[1],
            });
            points.push(FewShotPoint {
                model: MODEL_COLD_GBDT.into(),
                n,
                seed_index: s,
                auc: cell[2],
            });
        }
        let (pm, psd) = mean_sd(&pre);
        let (mm, msd) = mean_sd(&mlp);
        let (gm, gsd) = mean_sd(&gbdt);
        let t_mlp = paired_ttest(&pre, &mlp)?;
        let t_gbdt = paired_ttest(&pre, &gbdt)?;
        let enough_seeds = cfg.n_seeds >= MIN_SEEDS_FOR_WINS;
        summaries.push(SizeSummary {
            n,
            pretrained_mean: pm,
            pretrained_sd: psd,
            cold_mlp_mean: mm,
            cold_mlp_sd: msd,
            cold_gbdt_mean: gm,
            cold_gbdt_sd: gsd,
            gain_abs_vs_mlp: pm - mm,
            gain_rel_vs_mlp: pm / mm - 1.0,
            gain_abs_vs_gbdt: pm - gm,
            gain_rel_vs_gbdt: pm / gm - 1.0,
            wins_vs_mlp: enough_seeds.then(|| wins(&pre, &mlp)),
            wins_vs_gbdt: enough_seeds.then(|| wins(&pre, &gbdt)),
            p_vs_mlp: t_mlp.p,
            p_vs_gbdt: t_gbdt.p,
        });
    }

    Ok(FewShotCurve {
        target_country: target_country.to_string(),
        eval_countries: eval_set.countries(),
        sizes,
        n_seeds: cfg.n_seeds,
        points,
        summaries,
        skipped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_sizes_are_the_protocol_grid() {
        assert_eq!(
            DEFAULT_FEWSHOT_SIZES,
            [50, 100, 200, 500, 1000, 2000, 5000]
        );
        assert_eq!(DEFAULT_FEWSHOT_SEEDS, 10);
    }

    #[test]
    fn identical_models_split_wins_evenly_with_degenerate_p() {
        let a = vec![0.7, 0.6, 0.8, 0.5];
        assert_eq!(wins(&a, &a), 2.0);
        let t = paired_ttest(&a, &a).unwrap();
        assert_eq!(t.p, 1.0);
        assert!(t.degenerate);
    }

    #[test]
    fn wins_counts_strict_and_ties() {
        assert_eq!(wins(&[0.7, 0.5, 0.6], &[0.6, 0.5, 0.7]), 1.5);
    }
}
