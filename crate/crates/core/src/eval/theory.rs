//! Head-only sample-complexity curve on a frozen encoder.
//!
//! For each training budget n, a linear (logistic) head is fitted on the
//! frozen latent representation and its AUC deficit against a head trained
//! on the full pool is recorded; mean deficits are then fitted to c/√n.
//! The head fit is deterministic given the sample, so per-seed spread is
//! pure sampling error — the quantity the scaling law describes.

use rand::seq::SliceRandom;
use serde::Serialize;

use crate::baselines::LogRegConfig;
use crate::data::{stratified_holdout, Dataset};
use crate::error::{Error, Result};
use crate::eval::metrics::auc;
use crate::jobs::run_indexed;
use crate::mat::Mat;
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::tmae::{embed, EncoderCheckpoint};

/// Ridge strength on the head; keeps separable small-n fits finite.
const HEAD_L2: f64 = 1e-3;

#[derive(Debug, Clone, Serialize)]
pub struct TheoryPoint {
    pub n: usize,
    pub mean_deficit: f64,
    pub sd_deficit: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct TheoryCurve {
    pub reference_n: usize,
    pub reference_auc: f64,
    pub points: Vec<TheoryPoint>,
    /// Least-squares coefficient of deficit ≈ c/√n (through the origin).
    pub c_fit: f64,
    /// Pearson correlation between mean deficits and 1/√n.
    pub correlation: f64,
}

impl TheoryCurve {
    pub fn to_csv_string(&self) -> String {
        let mut out = String::from("n,mean_deficit,sd_deficit\n");
        for p in &self.points {
            out.push_str(&format!("{},{},{}\n", p.n, p.mean_deficit, p.sd_deficit));
        }
        out
    }
}

pub fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    for (a, b) in x.iter().zip(y) {
        cov += (a - mx) * (b - my);
        sx += (a - mx) * (a - mx);
        sy += (b - my) * (b - my);
    }
    cov / (sx.sqrt() * sy.sqrt()).max(1e-300)
}

fn head_auc(latent_train: &Mat, y_train: &[f64], latent_test: &Mat, y_test: &[f64]) -> Result<f64> {
    let cfg = LogRegConfig {
        learning_rate: 0.05,
        tolerance: 1e-7,
        max_iterations: 2000,
    };
    let (w, b, _, _) = crate::baselines::fit_logistic_raw(latent_train, y_train, HEAD_L2, &cfg);
    let scores: Vec<f64> = (0..latent_test.rows())
        .map(|i| {
            latent_test
                .row(i)
                .iter()
                .zip(&w)
                .map(|(a, wj)| a * wj)
                .sum::<f64>()
                + b
        })
        .collect();
    auc(&scores, y_test)
}

/// Runs the head-only protocol on `target` data: 30% becomes a fixed test
/// side, the rest is the sampling pool; the reference head trains on the
/// whole pool.
pub fn sample_complexity_curve(
    ckpt: &EncoderCheckpoint,
    target: &Dataset,
    sizes: &[usize],
    n_seeds: usize,
    seed: u64,
    jobs: usize,
) -> Result<TheoryCurve> {
    if sizes.is_empty() || n_seeds == 0 {
        return Err(Error::Config("need sizes and n_seeds >= 1".into()));
    }
    let (pool, test) = stratified_holdout(target, 0.3, derive_seed(seed, stream::THEORY, 0))?;
    if !test.has_both_classes() {
        return Err(Error::Data("test side has a single class".into()));
    }
    let max_n = *sizes.iter().max().unwrap();
    if max_n > pool.n_rows() {
        return Err(Error::Data(format!(
            "largest size {max_n} exceeds the {}-row pool",
            pool.n_rows()
        )));
    }

    let latent_pool = embed(ckpt, &pool.features)?;
    let latent_test = embed(ckpt, &test.features)?;
    let y_pool = pool.labels_f64();
    let y_test = test.labels_f64();

    let reference_auc = head_auc(&latent_pool, &y_pool, &latent_test, &y_test)?;

    let cells: Vec<(usize, usize)> = (0..n_seeds)
        .flat_map(|s| (0..sizes.len()).map(move |si| (s, si)))
        .collect();
    let results: Vec<Result<f64>> = run_indexed(cells.len(), jobs, |k| {
        let (s, si) = cells[k];
        let n = sizes[si];
        let cell_seed = derive_seed(seed, stream::THEORY, (1 + s * 1000 + si) as u64);
        let mut idx: Vec<usize> = (0..pool.n_rows()).collect();
        let mut rng = rng_from_seed(cell_seed);
        idx.shuffle(&mut rng);
        let chosen = &idx[..n];
        let latent_train = latent_pool.select_rows(chosen);
        let y_train: Vec<f64> = chosen.iter().map(|&i| y_pool[i]).collect();
        if !(y_train.contains(&0.0) && y_train.contains(&1.0)) {
            return Err(Error::Data(format!("subsample of {n} is single-class")));
        }
        Ok(reference_auc - head_auc(&latent_train, &y_train, &latent_test, &y_test)?)
    });

    let mut deficits: Vec<Vec<f64>> = vec![Vec::with_capacity(n_seeds); sizes.len()];
    for (k, r) in results.into_iter().enumerate() {
        let (_, si) = cells[k];
        deficits[si].push(r?);
    }

    let mut points = Vec::with_capacity(sizes.len());
    for (si, &n) in sizes.iter().enumerate() {
        let d = &deficits[si];
        let mean = d.iter().sum::<f64>() / d.len() as f64;
        let sd = if d.len() < 2 {
            0.0
        } else {
            (d.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (d.len() as f64 - 1.0))
                .sqrt()
        };
        points.push(TheoryPoint {
            n,
            mean_deficit: mean,
            sd_deficit: sd,
        });
    }

    let x: Vec<f64> = sizes.iter().map(|&n| 1.0 / (n as f64).sqrt()).collect();
    let d: Vec<f64> = points.iter().map(|p| p.mean_deficit).collect();
    let c_fit =
        x.iter().zip(&d).map(|(a, b)| a * b).sum::<f64>() / x.iter().map(|a| a * a).sum::<f64>();
    let correlation = pearson(&d, &x);

    Ok(TheoryCurve {
        reference_n: pool.n_rows(),
        reference_auc,
        points,
        c_fit,
        correlation,
    })
}
