//! Supervised fine-tuning of the pre-trained encoder, early stopping on
//! validation AUC, and the multi-seed ensemble.

use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Standardizer};
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::mat::Mat;
use crate::nn::{
    adam_step_masked, backward, bce_loss, forward, sigmoid, AdamState, Mode, MlpParams,
};
use crate::rng::{derive_seed, rng_from_seed, stream};
use crate::tmae::{EncoderCheckpoint, PretrainMeta};

pub const MODEL_FORMAT_VERSION: &str = "1";
pub const DEFAULT_ENSEMBLE_SIZE: usize = 5;

/// Anything that maps raw feature rows to probabilities. The evaluation
/// protocols (importance, calibration, equity, zero-shot tables) are generic
/// over this.
pub trait ProbScorer {
    fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FinetuneConfig {
    pub learning_rate: f64,
    pub l2: f64,
    pub dropout: f64,
    /// Epochs without a validation-AUC improvement before stopping.
    pub patience: usize,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    /// Train only the linear head, leaving encoder weights untouched.
    pub freeze_encoder: bool,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            learning_rate: 0.00115,
            l2: 0.00143,
            dropout: 0.15,
            patience: 10,
            max_epochs: 200,
            batch_size: 512,
            seed: 42,
            freeze_encoder: false,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.learning_rate <= 0.0 {
            return Err(Error::Config("learning_rate must be positive".into()));
        }
        if self.patience == 0 {
            return Err(Error::Config("patience must be >= 1".into()));
        }
        if self.max_epochs == 0 || self.batch_size == 0 {
            return Err(Error::Config("max_epochs and batch_size must be >= 1".into()));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config("dropout must be in [0, 1)".into()));
        }
        if self.l2 < 0.0 {
            return Err(Error::Config("l2 must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub train_loss: f64,
    pub val_auc: f64,
}

/// Best-epoch tracking: strict improvements reset the counter; training
/// stops after `patience` epochs without one. The caller restores the
/// weights snapshotted at the best epoch (store-and-restore, never
/// last-epoch).
#[derive(Debug, Clone)]
pub struct EarlyStopper {
    patience: usize,
    best: f64,
    best_epoch: usize,
    since_best: usize,
}

impl EarlyStopper {
    pub fn new(patience: usize) -> Self {
        EarlyStopper {
            patience,
            best: f64::NEG_INFINITY,
            best_epoch: 0,
            since_best: 0,
        }
    }

    /// Feeds one epoch's validation score (epochs are 1-based); returns
    /// `true` when this epoch is a new best, i.e. its weights should be
    /// snapshotted.
    pub fn observe(&mut self, epoch: usize, val_score: f64) -> bool {
        if val_score > self.best {
            self.best = val_score;
            self.best_epoch = epoch;
            self.since_best = 0;
            true
        } else {
            self.since_best += 1;
            false
        }
    }

    pub fn should_stop(&self) -> bool {
        self.since_best >= self.patience
    }

    pub fn best_epoch(&self) -> usize {
        self.best_epoch
    }

    pub fn best_score(&self) -> f64 {
        self.best
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// Pre-training metadata of the source checkpoint, when there is one.
    pub checkpoint: Option<PretrainMeta>,
    pub seed: u64,
    pub config: FinetuneConfig,
}

/// Encoder layers plus a single linear unit ending in a sigmoid. The network
/// output is the logit; [`ClassifierModel::predict_proba`] applies the
/// sigmoid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassifierModel {
    pub format_version: String,
    net: MlpParams,
    /// Leading layers that came from (or stand in for) the encoder; these
    /// are the ones `freeze_encoder` pins.
    n_encoder_layers: usize,
    pub standardizer: Standardizer,
    pub feature_names: Vec<String>,
    pub history: Vec<EpochStats>,
    pub provenance: Provenance,
}

impl ClassifierModel {
    /// Copies encoder weights from a checkpoint and glues a zero-initialized
    /// linear head on top; the decoder is discarded.
    ///
    /// A zero head makes the initial model output exactly 0.5 everywhere, so
    /// the first gradient step aligns the head with the training signal —
    /// a randomly initialized head starts sign-inverted half the time, which
    /// tiny validation sets cannot reliably detect.
    pub fn init_from_encoder(ckpt: &EncoderCheckpoint, cfg: &FinetuneConfig) -> Result<Self> {
        cfg.validate()?;
        ckpt.validate()?;
        let mut head = MlpParams::init(
            &[ckpt.latent_dim(), 1],
            derive_seed(cfg.seed, stream::INIT, 1),
        )?;
        head.weight_mut(0).as_mut_slice().fill(0.0);
        head.bias_mut(0).fill(0.0);
        let net = ckpt.encoder.stacked_with(&head)?;
        Ok(ClassifierModel {
            format_version: MODEL_FORMAT_VERSION.into(),
            net,
            n_encoder_layers: ckpt.encoder.n_layers(),
            standardizer: ckpt.standardizer.clone(),
            feature_names: ckpt.feature_names.clone(),
            history: Vec::new(),
            provenance: Provenance {
                checkpoint: Some(ckpt.pretrain_meta.clone()),
                seed: cfg.seed,
                config: cfg.clone(),
            },
        })
    }

    /// Random-init model of the given architecture (`dims` ends in 1); the
    /// cold-start baseline path. Hidden layers are Glorot-initialized, the
    /// output head starts at zero (same rationale as
    /// [`ClassifierModel::init_from_encoder`]). The standardizer is fitted
    /// leniently on the local training sample.
    pub fn init_cold(
        dims: &[usize],
        train_features: &Mat,
        feature_names: &[String],
        cfg: &FinetuneConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if dims.last() != Some(&1) {
            return Err(Error::Config("classifier output width must be 1".into()));
        }
        if dims.first() != Some(&feature_names.len()) {
            return Err(Error::Config(
                "input width must match feature count".into(),
            ));
        }
        let mut net = MlpParams::init(dims, derive_seed(cfg.seed, stream::INIT, 2))?;
        let last = net.n_layers() - 1;
        net.weight_mut(last).as_mut_slice().fill(0.0);
        net.bias_mut(last).fill(0.0);
        let n_encoder_layers = net.n_layers() - 1;
        Ok(ClassifierModel {
            format_version: MODEL_FORMAT_VERSION.into(),
            net,
            n_encoder_layers,
            standardizer: Standardizer::fit_lenient(train_features),
            feature_names: feature_names.to_vec(),
            history: Vec::new(),
            provenance: Provenance {
                checkpoint: None,
                seed: cfg.seed,
                config: cfg.clone(),
            },
        })
    }

    pub fn net(&self) -> &MlpParams {
        &self.net
    }

    /// Direct weight access for experiment surgery (probing, forced-output
    /// constructions in tests).
    pub fn net_mut(&mut self) -> &mut MlpParams {
        &mut self.net
    }

    pub fn encoder_params(&self) -> Result<MlpParams> {
        self.net.truncated(self.n_encoder_layers)
    }

    /// Trainable parameter count under the model's freeze setting.
    pub fn n_trainable_params(&self) -> usize {
        if self.provenance.config.freeze_encoder {
            let l = self.net.n_layers() - 1;
            self.net.weight(l).as_slice().len() + self.net.bias(l).len()
        } else {
            self.net.n_params()
        }
    }

    fn logits(&self, rows: &Mat) -> Result<Vec<f64>> {
        if rows.cols() != self.feature_names.len() {
            return Err(Error::Schema(format!(
                "expected {} features, got {}",
                self.feature_names.len(),
                rows.cols()
            )));
        }
        let x = self.standardizer.transform(rows)?;
        let mut rng = rng_from_seed(0);
        let trace = forward(&self.net, &x, 0.0, Mode::Eval, &mut rng)?;
        Ok(trace.output().as_slice().to_vec())
    }

    pub fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        Ok(self.logits(rows)?.into_iter().map(sigmoid).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ClassifierModel = serde_json::from_str(s)?;
        if m.format_version != MODEL_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported model format version {:?}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

impl ProbScorer for ClassifierModel {
    fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        ClassifierModel::predict_proba(self, rows)
    }
}

/// Fine-tunes on `train`, early-stopping on `val` AUC.
///
/// Weights from the best-validation epoch are restored (store-and-restore,
/// never last-epoch). Training stops after `patience` epochs without strict
/// improvement or at `max_epochs`. Callers guarantee train and val are
/// disjoint; a single-class validation set is rejected because its AUC is
/// undefined.
pub fn finetune(
    mut model: ClassifierModel,
    train: &Dataset,
    val: &Dataset,
    cfg: &FinetuneConfig,
) -> Result<ClassifierModel> {
    cfg.validate()?;
    if !val.has_both_classes() {
        return Err(Error::Data(
            "validation set has a single class; AUC is undefined".into(),
        ));
    }
    if train.n_rows() == 0 {
        return Err(Error::Data("empty training set".into()));
    }
    let x_train = model.standardizer.transform(&train.features)?;
    let y_train = train.labels_f64();
    let val_labels = val.labels_f64();

    let trainable: Vec<bool> = (0..model.net.n_layers())
        .map(|l| !cfg.freeze_encoder || l == model.net.n_layers() - 1)
        .collect();
    let mut adam = AdamState::new(&model.net, cfg.learning_rate, cfg.l2)?;

    let mut best_net = model.net.clone();
    let mut stopper = EarlyStopper::new(cfg.patience);
    let mut history = Vec::new();
    let n = x_train.rows();
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 1..=cfg.max_epochs {
        let mut shuffle_rng = rng_from_seed(derive_seed(cfg.seed, stream::SHUFFLE, epoch as u64));
        use rand::seq::SliceRandom;
        order.shuffle(&mut shuffle_rng);
        let mut dropout_rng =
            rng_from_seed(derive_seed(cfg.seed, stream::DROPOUT, epoch as u64));

        let mut loss_sum = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let xb = x_train.select_rows(chunk);
            let yb: Vec<f64> = chunk.iter().map(|&i| y_train[i]).collect();
            let trace = forward(&model.net, &xb, cfg.dropout, Mode::Train, &mut dropout_rng)?;
            let probs: Vec<f64> = trace
                .output()
                .as_slice()
                .iter()
                .map(|&z| sigmoid(z))
                .collect();
            let (loss, grad_logits) = bce_loss(&probs, &yb)?;
            if !loss.is_finite() {
                return Err(Error::Numerical(format!(
                    "non-finite training loss at epoch {epoch}"
                )));
            }
            let g = Mat::from_vec(chunk.len(), 1, grad_logits)?;
            let (grads, _) = backward(&model.net, &trace, &g)?;
            adam_step_masked(&mut adam, &mut model.net, &grads, &trainable)?;
            loss_sum += loss * chunk.len() as f64;
        }
        let train_loss = loss_sum / n as f64;

        let val_scores = model.logits(&val.features)?;
        let val_auc = auc(&val_scores, &val_labels)?;
        history.push(EpochStats {
            train_loss,
            val_auc,
        });

        if stopper.observe(epoch, val_auc) {
            best_net = model.net.clone();
        }
        if stopper.should_stop() {
            break;
        }
    }

    model.net = best_net;
    model.history = history;
    Ok(model)
}

/// Splits off a stratified validation fraction and fine-tunes on the rest;
/// the protocol used when a caller has only one local sample.
pub fn finetune_with_auto_val(
    model: ClassifierModel,
    sample: &Dataset,
    val_fraction: f64,
    cfg: &FinetuneConfig,
) -> Result<ClassifierModel> {
    let (train_idx, val_idx) =
        crate::data::stratified_split_binary(&sample.outcome, val_fraction, cfg.seed)?;
    let train = sample.select(&train_idx);
    let val = sample.select(&val_idx);
    finetune(model, &train, &val, cfg)
}

/// Fixed-size committee of independently fine-tuned models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ensemble {
    pub members: Vec<ClassifierModel>,
}

impl Ensemble {
    /// Ensemble probability: the arithmetic mean of member probabilities
    /// (not logits), matching how the committee is calibrated and reported.
    /// All members must share a feature schema.
    pub fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        if self.members.is_empty() {
            return Err(Error::Config("empty ensemble".into()));
        }
        if self
            .members
            .iter()
            .any(|m| m.feature_names != self.members[0].feature_names)
        {
            return Err(Error::Schema(
                "ensemble members disagree on the feature schema".into(),
            ));
        }
        let mut acc = vec![0.0; rows.rows()];
        for m in &self.members {
            for (a, p) in acc.iter_mut().zip(m.predict_proba(rows)?) {
                *a += p;
            }
        }
        let k = self.members.len() as f64;
        Ok(acc.into_iter().map(|s| s / k).collect())
    }
}

impl ProbScorer for Ensemble {
    fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        Ensemble::predict_proba(self, rows)
    }
}

/// On-disk model container: a single fine-tuned classifier or a committee.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "model", rename_all = "snake_case")]
pub enum ModelFile {
    Classifier(ClassifierModel),
    Ensemble(Ensemble),
}

impl ModelFile {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    pub fn feature_names(&self) -> &[String] {
        match self {
            ModelFile::Classifier(m) => &m.feature_names,
            ModelFile::Ensemble(e) => &e.members[0].feature_names,
        }
    }
}

impl ProbScorer for ModelFile {
    fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        match self {
            ModelFile::Classifier(m) => m.predict_proba(rows),
            ModelFile::Ensemble(e) => e.predict_proba(rows),
        }
    }
}

/// Fine-tunes one member per seed (seeds must be distinct) on the same
/// train/val split. Members are independent, so the resulting committee is
/// order-insensitive at prediction time.
pub fn train_ensemble(
    ckpt: &EncoderCheckpoint,
    train: &Dataset,
    val: &Dataset,
    cfg: &FinetuneConfig,
    seeds: &[u64],
) -> Result<Ensemble> {
    if seeds.is_empty() {
        return Err(Error::Config("need at least one seed".into()));
    }
    let mut sorted = seeds.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != seeds.len() {
        return Err(Error::Config("ensemble seeds must be distinct".into()));
    }
    let mut members = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let mut member_cfg = cfg.clone();
        member_cfg.seed = seed;
        let model = ClassifierModel::init_from_encoder(ckpt, &member_cfg)?;
        members.push(finetune(model, train, val, &member_cfg)?);
    }
    Ok(Ensemble { members })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::auc_pair_count;
    use crate::tmae::{pretrain, PretrainConfig};
    use rand::Rng;

    fn toy_checkpoint(d: usize, seed: u64) -> EncoderCheckpoint {
        let mut rng = rng_from_seed(seed);
        let rows: Vec<Vec<f64>> = (0..256)
            .map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let names: Vec<String> = (0..d).map(|j| format!("f{j}")).collect();
        let cfg = PretrainConfig {
            epochs: 3,
            batch_size: 64,
            learning_rate: 0.002,
            mask_ratio: 0.5,
            seed,
            hidden_dims: (16, 8),
        };
        pretrain(&Mat::from_rows(&rows).unwrap(), &names, &cfg).unwrap().checkpoint
    }

    fn separable_dataset(n: usize, seed: u64) -> Dataset {
        // label = 1 iff a linear score of two informative features is positive
        let mut rng = rng_from_seed(seed);
        let mut rows = Vec::with_capacity(n);
        let mut outcome = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<f64> = (0..2).map(|_| rng.random_range(-1.0..1.0)).collect();
            outcome.push(u8::from(row[0] + 0.5 * row[1] > 0.0));
            rows.push(row);
        }
        Dataset::new(
            Mat::from_rows(&rows).unwrap(),
            outcome,
            vec!["A".into(); n],
            vec!["R".into(); n],
            (0..n as u64).collect(),
            vec!["f0".into(), "f1".into()],
        )
        .unwrap()
    }

    fn quick_cfg(seed: u64) -> FinetuneConfig {
        FinetuneConfig {
            learning_rate: 0.02,
            l2: 0.0,
            dropout: 0.0,
            patience: 10,
            max_epochs: 50,
            batch_size: 64,
            seed,
            freeze_encoder: false,
        }
    }

    #[test]
    fn defaults_match_published_recipe() {
        let c = FinetuneConfig::default();
        assert_eq!(c.learning_rate, 0.00115);
        assert_eq!(c.l2, 0.00143);
        assert_eq!(c.dropout, 0.15);
        assert_eq!(c.patience, 10);
        assert_eq!(c.batch_size, 512);
        assert!(!c.freeze_encoder);
    }

    #[test]
    fn init_is_deterministic_and_copies_encoder() {
        let ckpt = toy_checkpoint(4, 3);
        let cfg = quick_cfg(9);
        let a = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        let b = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.encoder_params().unwrap(), ckpt.encoder)
    }

    #[test]
    fn frozen_model_has_head_only_trainable_params() {
        let ckpt = toy_checkpoint(4, 5);
        let mut cfg = quick_cfg(1);
        cfg.freeze_encoder = true;
        let m = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        // latent width 8 → 8 weights + 1 bias
        assert_eq!(m.n_trainable_params(), 9);
    }

    #[test]
    fn separable_data_reaches_auc_one() {
        let data = separable_dataset(300, 7);
        let (tr, va) = crate::data::stratified_holdout(&data, 0.3, 1).unwrap();
        let ckpt = toy_checkpoint(2, 11);
        let cfg = quick_cfg(13);
        let model = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        let fitted = finetune(model, &tr, &va, &cfg).unwrap();
        let scores = fitted.predict_proba(&va.features).unwrap();
        let labels = va.labels_f64();
        let a = auc(&scores, &labels).unwrap();
        let oracle = auc_pair_count(&scores, &labels).unwrap();
        assert!((a - oracle).abs() < 1e-12);
        assert!(a > 0.999, "auc {a}");
    }

    #[test]
    fn early_stopping_restores_best_epoch() {
        let data = separable_dataset(200, 19);
        let (tr, va) = crate::data::stratified_holdout(&data, 0.25, 2).unwrap();
        let ckpt = toy_checkpoint(2, 23);
        let mut cfg = quick_cfg(29);
        cfg.patience = 3;
        cfg.max_epochs = 100;
        let model = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        let fitted = finetune(model, &tr, &va, &cfg).unwrap();
        let best = fitted
            .history
            .iter()
            .map(|e| e.val_auc)
            .fold(f64::NEG_INFINITY, f64::max);
        // restored weights score exactly the best recorded epoch
        let scores: Vec<f64> = fitted.predict_proba(&va.features).unwrap();
        let a = auc(&scores, &va.labels_f64()).unwrap();
        assert!((a - best).abs() < 1e-12, "{a} vs {best}");
        // stopping happened `patience` epochs after the best one
        let argmax = fitted
            .history
            .iter()
            .enumerate()
            .max_by(|x, y| x.1.val_auc.partial_cmp(&y.1.val_auc).unwrap())
            .unwrap()
            .0;
        let first_best = fitted
            .history
            .iter()
            .position(|e| e.val_auc == best)
            .unwrap();
        assert!(fitted.history.len() <= argmax.max(first_best) + cfg.patience + 1);
    }

    #[test]
    fn early_stopping_protocol_trace() {
        // val AUC strictly improves for 5 epochs then plateaus exactly:
        // with patience 10 the run stops after epoch 15 and keeps epoch 5
        let mut stopper = EarlyStopper::new(10);
        let mut last_epoch = 0;
        for epoch in 1..=100 {
            let val = if epoch <= 5 { epoch as f64 / 10.0 } else { 0.5 };
            let snapshot = stopper.observe(epoch, val);
            assert_eq!(snapshot, epoch <= 5, "epoch {epoch}");
            last_epoch = epoch;
            if stopper.should_stop() {
                break;
            }
        }
        assert_eq!(last_epoch, 15);
        assert_eq!(stopper.best_epoch(), 5);
        assert_eq!(stopper.best_score(), 0.5);
    }

    #[test]
    fn max_epochs_caps_training() {
        let data = separable_dataset(120, 77);
        let (tr, va) = crate::data::stratified_holdout(&data, 0.25, 6).unwrap();
        let ckpt = toy_checkpoint(2, 79);
        let mut cfg = quick_cfg(81);
        cfg.patience = 10_000; // never triggers
        cfg.max_epochs = 7;
        let model = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        let fitted = finetune(model, &tr, &va, &cfg).unwrap();
        assert_eq!(fitted.history.len(), 7);
    }

    #[test]
    fn single_class_validation_is_rejected() {
        let data = separable_dataset(100, 31);
        let pos: Vec<usize> = (0..data.n_rows()).filter(|&i| data.outcome[i] == 1).collect();
        let val = data.select(&pos);
        let ckpt = toy_checkpoint(2, 37);
        let cfg = quick_cfg(41);
        let model = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        assert!(finetune(model, &data, &val, &cfg).is_err());
    }

    #[test]
    fn n50_sample_is_accepted() {
        let data = separable_dataset(50, 43);
        let ckpt = toy_checkpoint(2, 47);
        let cfg = quick_cfg(53);
        let model = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        let fitted = finetune_with_auto_val(model, &data, 0.2, &cfg).unwrap();
        assert!(!fitted.history.is_empty());
    }

    #[test]
    fn frozen_encoder_weights_do_not_move() {
        let data = separable_dataset(120, 59);
        let (tr, va) = crate::data::stratified_holdout(&data, 0.25, 3).unwrap();
        let ckpt = toy_checkpoint(2, 61);
        let mut cfg = quick_cfg(67);
        cfg.freeze_encoder = true;
        let model = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        let before = model.encoder_params().unwrap();
        let fitted = finetune(model, &tr, &va, &cfg).unwrap();
        assert_eq!(fitted.encoder_params().unwrap(), before);
    }

    #[test]
    fn ensemble_mean_and_permutation_invariance() {
        let ckpt = toy_checkpoint(2, 71);
        let cfg = quick_cfg(73);
        let data = separable_dataset(80, 79);
        let (tr, va) = crate::data::stratified_holdout(&data, 0.25, 4).unwrap();
        let ens = train_ensemble(&ckpt, &tr, &va, &cfg, &[1, 2, 3, 4, 5]).unwrap();
        assert_eq!(ens.members.len(), 5);
        let p = ens.predict_proba(&va.features).unwrap();
        let mut member_probs: Vec<Vec<f64>> = ens
            .members
            .iter()
            .map(|m| m.predict_proba(&va.features).unwrap())
            .collect();
        for (i, &pi) in p.iter().enumerate() {
            let mean = member_probs.iter().map(|mp| mp[i]).sum::<f64>() / 5.0;
            assert!((pi - mean).abs() < 1e-15);
        }
        member_probs.reverse();
        let reversed = Ensemble {
            members: ens.members.iter().rev().cloned().collect(),
        };
        let p2 = reversed.predict_proba(&va.features).unwrap();
        for (a, b) in p.iter().zip(&p2) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn duplicate_seeds_are_rejected() {
        let ckpt = toy_checkpoint(2, 83);
        let cfg = quick_cfg(89);
        let data = separable_dataset(80, 97);
        let (tr, va) = crate::data::stratified_holdout(&data, 0.25, 5).unwrap();
        assert!(train_ensemble(&ckpt, &tr, &va, &cfg, &[1, 2, 2]).is_err());
    }

    #[test]
    fn zero_head_outputs_half() {
        let ckpt = toy_checkpoint(2, 101);
        let cfg = quick_cfg(103);
        let mut m = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        let l = m.net.n_layers() - 1;
        m.net.weight_mut(l).as_mut_slice().fill(0.0);
        m.net.bias_mut(l).fill(0.0);
        let rows = Mat::from_vec(3, 2, vec![0.1, 0.5, -1.0, 2.0, 0.0, 0.0]).unwrap();
        let p = m.predict_proba(&rows).unwrap();
        assert!(p.iter().all(|&v| v == 0.5));
    }

    #[test]
    fn model_json_round_trip() {
        let ckpt = toy_checkpoint(3, 107);
        let cfg = quick_cfg(109);
        let m = ClassifierModel::init_from_encoder(&ckpt, &cfg).unwrap();
        let back = ClassifierModel::from_json(&m.to_json().unwrap()).unwrap();
        assert_eq!(m, back);
    }
}
