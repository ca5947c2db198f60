//! Self-supervised pre-training: feature masking, the encoder–decoder
//! reconstruction loop, and the serialized checkpoint.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::Standardizer;
use crate::error::{Error, Result};
use crate::mat::Mat;
use crate::nn::{
    adam_step, backward, forward, mse_masked_loss, AdamState, AdamVec, Mask, Mode, MlpParams,
};
use crate::rng::{derive_seed, rng_from_seed, stream, ChaCha8Rng};

pub const CHECKPOINT_FORMAT_VERSION: &str = "1";

/// Initial value of every mask-token coordinate, in standardized units
/// (zero is the column mean; training moves it from there).
const MASK_TOKEN_INIT: f64 = 0.0;

/// Masked feature indices for one row: exactly `round(ratio·d)` of them,
/// unique, sorted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MaskSpec {
    indices: Vec<usize>,
}

impl MaskSpec {
    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Test-only constructor for hand-built masks.
    pub fn from_indices(mut indices: Vec<usize>) -> Self {
        indices.sort_unstable();
        indices.dedup();
        MaskSpec { indices }
    }
}

/// Number of features masked per row at the given ratio.
pub fn masked_count(d: usize, ratio: f64) -> usize {
    (ratio * d as f64).round() as usize
}

/// Uniform sample without replacement of `round(ratio·d)` feature indices.
pub fn sample_mask(d: usize, ratio: f64, rng: &mut ChaCha8Rng) -> Result<MaskSpec> {
    let k = masked_count(d, ratio);
    if k == 0 || k >= d {
        return Err(Error::Config(format!(
            "mask ratio {ratio} on {d} features would mask {k} of them"
        )));
    }
    let mut pool: Vec<usize> = (0..d).collect();
    let (chosen, _) = pool.partial_shuffle(rng, k);
    let mut indices = chosen.to_vec();
    indices.sort_unstable();
    Ok(MaskSpec { indices })
}

/// Replaces masked coordinates with the corresponding mask-token entry.
pub fn apply_mask(row: &[f64], mask: &MaskSpec, mask_token: &[f64]) -> Vec<f64> {
    let mut out = row.to_vec();
    for &j in &mask.indices {
        out[j] = mask_token[j];
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PretrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub mask_ratio: f64,
    pub seed: u64,
    /// Encoder hidden widths; the decoder mirrors them.
    pub hidden_dims: (usize, usize),
}

impl Default for PretrainConfig {
    fn default() -> Self {
        PretrainConfig {
            epochs: 100,
            batch_size: 512,
            learning_rate: 0.001,
            mask_ratio: 0.70,
            seed: 42,
            hidden_dims: (256, 64),
        }
    }
}

impl PretrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be >= 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be >= 1".into()));
        }
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if !(0.0 < self.mask_ratio && self.mask_ratio < 1.0) {
            return Err(Error::Config("mask_ratio must be in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainMeta {
    pub epochs: usize,
    pub batch_size: usize,
    pub mask_ratio: f64,
    pub seed: u64,
    pub final_loss: f64,
}

/// The transfer artifact: encoder/decoder weights, the learned mask token,
/// the pooled standardizer, and the schema it was trained on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EncoderCheckpoint {
    pub format_version: String,
    pub encoder: MlpParams,
    pub decoder: MlpParams,
    pub mask_token: Vec<f64>,
    pub standardizer: Standardizer,
    pub feature_names: Vec<String>,
    pub pretrain_meta: PretrainMeta,
}

impl EncoderCheckpoint {
    pub fn validate(&self) -> Result<()> {
        if self.format_version != CHECKPOINT_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported checkpoint format version {:?}",
                self.format_version
            )));
        }
        let d = self.feature_names.len();
        if self.encoder.input_dim() != d
            || self.decoder.output_dim() != d
            || self.mask_token.len() != d
        {
            return Err(Error::Schema(
                "checkpoint widths do not match feature_names".into(),
            ));
        }
        if self.encoder.output_dim() != self.decoder.input_dim() {
            return Err(Error::Schema(
                "encoder output width does not match decoder input".into(),
            ));
        }
        self.standardizer.validate()?;
        if self.standardizer.mean.len() != d {
            return Err(Error::Schema("standardizer width mismatch".into()));
        }
        if !self.encoder.all_finite() || !self.decoder.all_finite() {
            return Err(Error::Numerical("checkpoint weights must be finite".into()));
        }
        Ok(())
    }

    pub fn latent_dim(&self) -> usize {
        self.encoder.output_dim()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ckpt: EncoderCheckpoint = serde_json::from_str(s)?;
        ckpt.validate()?;
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: e,
        })?;
        Self::from_json(&s)
    }
}

/// Pre-training result: the checkpoint plus the average masked-MSE per epoch
/// so callers can check the loss trend.
#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub checkpoint: EncoderCheckpoint,
    pub epoch_losses: Vec<f64>,
}

/// Trains the masked autoencoder on raw feature rows (labels never enter).
///
/// Fits the standardizer on this pool (constant columns pass through with
/// unit scale), then per epoch re-samples a fresh mask for every row, feeds
/// token-masked inputs through encoder+decoder, and minimizes masked MSE.
/// The mask token is a per-feature learnable vector updated by the same
/// optimizer schedule as the network.
pub fn pretrain(
    features: &Mat,
    feature_names: &[String],
    cfg: &PretrainConfig,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if features.rows() == 0 {
        return Err(Error::Data("cannot pre-train on an empty matrix".into()));
    }
    let d = features.cols();
    if feature_names.len() != d {
        return Err(Error::Shape("feature_names width mismatch".into()));
    }
    let k = masked_count(d, cfg.mask_ratio);
    if k == 0 || k >= d {
        return Err(Error::Config(format!(
            "mask ratio {} would mask {k}/{d} features",
            cfg.mask_ratio
        )));
    }

    let standardizer = Standardizer::fit_lenient(features);
    let x = standardizer.transform(features)?;
    let (h1, h2) = cfg.hidden_dims;
    let dims = [d, h1, h2, h1, d];
    let mut net = MlpParams::init(&dims, derive_seed(cfg.seed, stream::INIT, 0))?;
    let mut adam = AdamState::new(&net, cfg.learning_rate, 0.0)?;
    // start the token well outside the standardized data range so masked
    // cells are distinguishable from ordinary near-mean values; training
    // moves it from there
    let mut token = vec![MASK_TOKEN_INIT; d];
    let mut token_adam = AdamVec::new(d);

    let n = x.rows();
    let mut order: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let mut shuffle_rng =
            rng_from_seed(derive_seed(cfg.seed, stream::SHUFFLE, epoch as u64));
        order.shuffle(&mut shuffle_rng);
        let mut mask_rng = rng_from_seed(derive_seed(cfg.seed, stream::MASK, epoch as u64));

        let mut loss_sum = 0.0;
        let mut cell_count = 0usize;
        for (batch_no, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let target = x.select_rows(chunk);
            let mut masked = Mat::zeros(chunk.len(), d);
            let mut row_masks = Vec::with_capacity(chunk.len());
            for (r, _) in chunk.iter().enumerate() {
                let spec = sample_mask(d, cfg.mask_ratio, &mut mask_rng)?;
                masked
                    .row_mut(r)
                    .copy_from_slice(&apply_mask(target.row(r), &spec, &token));
                row_masks.push(spec.indices().to_vec());
            }
            let mask = Mask::from_row_indices(chunk.len(), d, &row_masks)?;

            let mut fwd_rng = rng_from_seed(0); // dropout unused in pre-training
            let trace = forward(&net, &masked, 0.0, Mode::Train, &mut fwd_rng)?;
            let (loss, grad) = mse_masked_loss(trace.output(), &target, &mask)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite reconstruction loss at epoch {epoch}, batch {batch_no}"
                )));
            }
            let (grads, input_grad) = backward(&net, &trace, &grad)?;
            adam_step(&mut adam, &mut net, &grads).map_err(|e| {
                Error::Numerical(format!("epoch {epoch}, batch {batch_no}: {e}"))
            })?;

            // the token receives gradient only through masked coordinates
            let mut token_grad = vec![0.0; d];
            for (r, _) in chunk.iter().enumerate() {
                let gi = input_grad.row(r);
                for &j in &row_masks[r] {
                    token_grad[j] += gi[j];
                }
            }
            token_adam.step(&mut token, &token_grad, cfg.learning_rate)?;

            let cells = mask.count();
            loss_sum += loss * cells as f64;
            cell_count += cells;
        }
        epoch_losses.push(loss_sum / cell_count as f64);
    }

    let encoder = net.truncated(2)?;
    let decoder = MlpParams::from_layers(
        vec![net.weight(2).clone(), net.weight(3).clone()],
        vec![net.bias(2).to_vec(), net.bias(3).to_vec()],
    )?;
    let checkpoint = EncoderCheckpoint {
        format_version: CHECKPOINT_FORMAT_VERSION.into(),
        encoder,
        decoder,
        mask_token: token,
        standardizer,
        feature_names: feature_names.to_vec(),
        pretrain_meta: PretrainMeta {
            epochs: cfg.epochs,
            batch_size: cfg.batch_size,
            mask_ratio: cfg.mask_ratio,
            seed: cfg.seed,
            final_loss: *epoch_losses.last().unwrap(),
        },
    };
    Ok(PretrainOutcome {
        checkpoint,
        epoch_losses,
    })
}

/// Latent representation of raw rows (standardize, encode; no masking).
pub fn embed(ckpt: &EncoderCheckpoint, rows: &Mat) -> Result<Mat> {
    if rows.cols() != ckpt.feature_names.len() {
        return Err(Error::Schema(format!(
            "expected {} features, got {}",
            ckpt.feature_names.len(),
            rows.cols()
        )));
    }
    let x = ckpt.standardizer.transform(rows)?;
    let mut rng = rng_from_seed(0);
    let trace = forward(&ckpt.encoder, &x, 0.0, Mode::Eval, &mut rng)?;
    Ok(trace.output().clone())
}

/// Runs token-masked rows through encoder+decoder and scores Eq-style
/// masked MSE (in standardized space) over the provided mask.
pub fn reconstruct(ckpt: &EncoderCheckpoint, rows: &Mat, mask: &Mask) -> Result<(Mat, f64)> {
    if rows.cols() != ckpt.feature_names.len() {
        return Err(Error::Schema(format!(
            "expected {} features, got {}",
            ckpt.feature_names.len(),
            rows.cols()
        )));
    }
    let x = ckpt.standardizer.transform(rows)?;
    let mut masked = x.clone();
    for i in 0..masked.rows() {
        let row = masked.row_mut(i);
        for j in 0..row.len() {
            if mask.get(i, j) {
                row[j] = ckpt.mask_token[j];
            }
        }
    }
    let full = ckpt.encoder.stacked_with(&ckpt.decoder)?;
    let mut rng = rng_from_seed(0);
    let trace = forward(&full, &masked, 0.0, Mode::Eval, &mut rng)?;
    let (mse, _) = mse_masked_loss(trace.output(), &x, mask)?;
    Ok((trace.output().clone(), mse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    fn names(d: usize) -> Vec<String> {
        (0..d).map(|j| format!("f{j}")).collect()
    }

    fn quick_cfg(epochs: usize, seed: u64) -> PretrainConfig {
        PretrainConfig {
            epochs,
            batch_size: 128,
            learning_rate: 0.003,
            mask_ratio: 0.5,
            seed,
            hidden_dims: (16, 8),
        }
    }

    #[test]
    fn defaults_are_the_published_recipe() {
        let c = PretrainConfig::default();
        assert_eq!(c.epochs, 100);
        assert_eq!(c.batch_size, 512);
        assert_eq!(c.learning_rate, 0.001);
        assert_eq!(c.mask_ratio, 0.70);
        assert_eq!(c.hidden_dims, (256, 64));
    }

    #[test]
    fn mask_count_rounding() {
        assert_eq!(masked_count(11, 0.70), 8); // round(7.7)
        assert_eq!(masked_count(11, 0.05), 1); // round(0.55)
        assert_eq!(masked_count(10, 0.70), 7);
    }

    #[test]
    fn sample_mask_is_exact_unique_and_in_range() {
        let mut rng = rng_from_seed(1);
        for _ in 0..200 {
            let m = sample_mask(11, 0.70, &mut rng).unwrap();
            assert_eq!(m.len(), 8);
            let mut s = m.indices().to_vec();
            s.dedup();
            assert_eq!(s.len(), 8);
            assert!(m.indices().iter().all(|&j| j < 11));
            assert!(m.indices().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn sample_mask_rejects_degenerate_ratios() {
        let mut rng = rng_from_seed(1);
        assert!(sample_mask(11, 0.01, &mut rng).is_err()); // 0 masked
        assert!(sample_mask(11, 0.99, &mut rng).is_err()); // all masked
    }

    #[test]
    fn mask_frequencies_are_uniform() {
        // 10,000 draws at d=11, ratio 0.70: each index near 8/11
        let mut rng = rng_from_seed(7);
        let mut counts = [0usize; 11];
        let draws = 10_000;
        for _ in 0..draws {
            for &j in sample_mask(11, 0.70, &mut rng).unwrap().indices() {
                counts[j] += 1;
            }
        }
        let expect = 8.0 / 11.0;
        for (j, &c) in counts.iter().enumerate() {
            let freq = c as f64 / draws as f64;
            assert!((freq - expect).abs() < 0.02, "index {j}: {freq}");
        }
    }

    #[test]
    fn apply_mask_cases() {
        let row = [1.0, 2.0];
        let token = [9.0, 9.0];
        assert_eq!(
            apply_mask(&row, &MaskSpec::from_indices(vec![]), &token),
            vec![1.0, 2.0]
        );
        assert_eq!(
            apply_mask(&row, &MaskSpec::from_indices(vec![1]), &token),
            vec![1.0, 9.0]
        );
        assert_eq!(
            apply_mask(&row, &MaskSpec::from_indices(vec![0, 1]), &[0.0, 0.0]),
            vec![0.0, 0.0]
        );
    }

    #[test]
    fn constant_dataset_reconstruction_goes_to_zero() {
        let row = vec![3.0, -1.0, 0.5, 7.0];
        let rows = vec![row; 64];
        let m = Mat::from_rows(&rows).unwrap();
        let out = pretrain(&m, &names(4), &quick_cfg(50, 3)).unwrap();
        let last = *out.epoch_losses.last().unwrap();
        assert!(last < 1e-3, "final loss {last}");
    }

    #[test]
    fn pretrain_is_deterministic() {
        let mut rng = rng_from_seed(5);
        let rows: Vec<Vec<f64>> = (0..128)
            .map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let m = Mat::from_rows(&rows).unwrap();
        let a = pretrain(&m, &names(4), &quick_cfg(3, 11)).unwrap();
        let b = pretrain(&m, &names(4), &quick_cfg(3, 11)).unwrap();
        assert_eq!(a.checkpoint, b.checkpoint);
        assert_eq!(a.epoch_losses, b.epoch_losses);
    }

    #[test]
    fn duplicated_column_is_recoverable() {
        // x1 duplicates x0; masking x1 alone should beat the column-mean
        // predictor by a wide margin
        let mut rng = rng_from_seed(9);
        let n = 1500;
        let mut rows = Vec::with_capacity(n);
        for _ in 0..n {
            let x: f64 = rng.sample(StandardNormal);
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            rows.push(vec![x, x, a, b]);
        }
        let m = Mat::from_rows(&rows).unwrap();
        let mut cfg = quick_cfg(60, 2);
        cfg.mask_ratio = 0.5;
        let out = pretrain(&m, &names(4), &cfg).unwrap();

        // held-out rows from the same generator
        let mut test_rows = Vec::with_capacity(400);
        for _ in 0..400 {
            let x: f64 = rng.sample(StandardNormal);
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            test_rows.push(vec![x, x, a, b]);
        }
        let t = Mat::from_rows(&test_rows).unwrap();
        let mut mask = Mask::new(t.rows(), 4);
        for i in 0..t.rows() {
            mask.set(i, 1, true);
        }
        let (_, mse) = reconstruct(&out.checkpoint, &t, &mask).unwrap();

        // column-mean predictor on the same masked cells, standardized space
        let z = out.checkpoint.standardizer.transform(&t).unwrap();
        let col: Vec<f64> = z.column(1);
        let baseline = col.iter().map(|v| v * v).sum::<f64>() / col.len() as f64;
        assert!(
            mse < 0.5 * baseline,
            "mse {mse} vs baseline {baseline}"
        );
    }

    #[test]
    fn untrained_checkpoint_scores_near_unit_mse() {
        let mut rng = rng_from_seed(13);
        let rows: Vec<Vec<f64>> = (0..800)
            .map(|_| (0..6).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let m = Mat::from_rows(&rows).unwrap();
        // one-epoch, tiny-lr run stands in for an untrained network
        let mut cfg = quick_cfg(1, 21);
        cfg.learning_rate = 1e-9;
        let out = pretrain(&m, &names(6), &cfg).unwrap();
        let mut mask_rng = rng_from_seed(31);
        let mut mask = Mask::new(m.rows(), 6);
        for i in 0..m.rows() {
            for &j in sample_mask(6, 0.5, &mut mask_rng).unwrap().indices() {
                mask.set(i, j, true);
            }
        }
        let (_, mse) = reconstruct(&out.checkpoint, &m, &mask).unwrap();
        assert!((mse - 1.0).abs() < 0.3, "mse {mse}");
    }

    #[test]
    fn embed_is_deterministic_with_latent_width() {
        let mut rng = rng_from_seed(17);
        let rows: Vec<Vec<f64>> = (0..64)
            .map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let m = Mat::from_rows(&rows).unwrap();
        let out = pretrain(&m, &names(4), &quick_cfg(2, 23)).unwrap();
        let a = embed(&out.checkpoint, &m).unwrap();
        let b = embed(&out.checkpoint, &m).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cols(), 8);
        // schema mismatch rejected
        assert!(embed(&out.checkpoint, &Mat::zeros(2, 5)).is_err());
    }

    #[test]
    fn checkpoint_round_trip_embed_is_bit_identical() {
        let mut rng = rng_from_seed(29);
        let rows: Vec<Vec<f64>> = (0..96)
            .map(|_| (0..5).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let m = Mat::from_rows(&rows).unwrap();
        let out = pretrain(&m, &names(5), &quick_cfg(2, 31)).unwrap();
        let json = out.checkpoint.to_json().unwrap();
        let back = EncoderCheckpoint::from_json(&json).unwrap();
        assert_eq!(out.checkpoint, back);
        assert_eq!(
            embed(&out.checkpoint, &m).unwrap(),
            embed(&back, &m).unwrap()
        );
    }

    #[test]
    fn checkpoint_with_bad_standardizer_is_rejected() {
        let mut rng = rng_from_seed(37);
        let rows: Vec<Vec<f64>> = (0..64)
            .map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let m = Mat::from_rows(&rows).unwrap();
        let mut ckpt = pretrain(&m, &names(4), &quick_cfg(1, 41)).unwrap().checkpoint;
        ckpt.standardizer.std[2] = 0.0;
        let json = serde_json::to_string(&ckpt).unwrap();
        assert!(EncoderCheckpoint::from_json(&json).is_err());
    }

    #[test]
    fn reconstruct_with_empty_mask_is_an_error() {
        let mut rng = rng_from_seed(43);
        let rows: Vec<Vec<f64>> = (0..64)
            .map(|_| (0..4).map(|_| rng.sample::<f64, _>(StandardNormal)).collect())
            .collect();
        let m = Mat::from_rows(&rows).unwrap();
        let ckpt = pretrain(&m, &names(4), &quick_cfg(1, 47)).unwrap().checkpoint;
        let mask = Mask::new(m.rows(), 4);
        assert!(reconstruct(&ckpt, &m, &mask).is_err());
    }
}
