//! Histogram gradient-boosted trees with logistic loss.
//!
//! No row/column subsampling; splits scan per-feature histograms whose bins
//! are quantile cuts of the training data (one bin per distinct value when
//! there are few, which makes histogram gains identical to exhaustive
//! single-threshold search). Leaf values are Newton steps in log-odds.

use serde::{Deserialize, Serialize};

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::auc;
use crate::mat::Mat;
use crate::nn::{logit, sigmoid};

pub const GBDT_FORMAT_VERSION: &str = "1";

/// Denominator guard for gain and leaf computations.
const MIN_HESSIAN: f64 = 1e-16;
/// Newton leaf values are clipped to this magnitude (log-odds).
const MAX_LEAF: f64 = 15.0;
/// A split must beat this gain to be taken.
const MIN_GAIN: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GbdtConfig {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub learning_rate: f64,
    pub min_samples_leaf: usize,
    pub n_bins: usize,
    /// Rounds without a validation-AUC improvement before stopping (when a
    /// validation set is supplied).
    pub early_stopping_rounds: usize,
    /// Recorded for provenance; the algorithm itself is deterministic.
    pub seed: u64,
}

impl Default for GbdtConfig {
    fn default() -> Self {
        GbdtConfig {
            n_estimators: 100,
            max_depth: 6,
            learning_rate: 0.1,
            min_samples_leaf: 20,
            n_bins: 64,
            early_stopping_rounds: 10,
            seed: 42,
        }
    }
}

impl GbdtConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_estimators == 0 {
            return Err(Error::Config("n_estimators must be >= 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Config("max_depth must be >= 1".into()));
        }
        if self.n_bins < 2 {
            return Err(Error::Config("n_bins must be >= 2".into()));
        }
        if self.learning_rate <= 0.0 || self.learning_rate > 1.0 {
            return Err(Error::Config("learning_rate must be in (0, 1]".into()));
        }
        if self.min_samples_leaf == 0 || self.early_stopping_rounds == 0 {
            return Err(Error::Config(
                "min_samples_leaf and early_stopping_rounds must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Node {
    Split {
        feature: usize,
        /// Raw threshold value; rows with `x[feature] <= threshold` go left.
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        value: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<Node>,
}

impl Tree {
    pub fn eval(&self, row: &[f64]) -> f64 {
        let mut i = 0;
        loop {
            match &self.nodes[i] {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left
                    } else {
                        *right
                    };
                }
            }
        }
    }

    /// Longest root-to-leaf path measured in splits.
    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundStats {
    pub train_loss: f64,
    pub val_auc: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GbdtModel {
    pub format_version: String,
    pub trees: Vec<Tree>,
    /// Prior log-odds added before any tree.
    pub base_score: f64,
    pub learning_rate: f64,
    /// Per-feature bin edges; kept so the model file is self-contained.
    pub bin_edges: Vec<Vec<f64>>,
    pub n_features: usize,
    pub config: GbdtConfig,
    pub history: Vec<RoundStats>,
    /// Set when training degenerated (e.g. single-class labels).
    pub warning: Option<String>,
}

impl GbdtModel {
    pub fn raw_scores(&self, rows: &Mat) -> Result<Vec<f64>> {
        if rows.cols() != self.n_features {
            return Err(Error::Schema(format!(
                "expected {} features, got {}",
                self.n_features,
                rows.cols()
            )));
        }
        let mut out = Vec::with_capacity(rows.rows());
        for i in 0..rows.rows() {
            let row = rows.row(i);
            let mut s = self.base_score;
            for t in &self.trees {
                s += self.learning_rate * t.eval(row);
            }
            out.push(s);
        }
        Ok(out)
    }

    pub fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        Ok(self.raw_scores(rows)?.into_iter().map(sigmoid).collect())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: GbdtModel = serde_json::from_str(s)?;
        if m.format_version != GBDT_FORMAT_VERSION {
            return Err(Error::Serde(format!(
                "unsupported gbdt format version {:?}",
                m.format_version
            )));
        }
        Ok(m)
    }
}

impl crate::classifier::ProbScorer for GbdtModel {
    fn predict_proba(&self, rows: &Mat) -> Result<Vec<f64>> {
        GbdtModel::predict_proba(self, rows)
    }
}

/// Quantile bin edges per feature; one bin per distinct value when the
/// feature has at most `n_bins` of them.
fn compute_bin_edges(features: &Mat, n_bins: usize) -> Vec<Vec<f64>> {
    let mut edges = Vec::with_capacity(features.cols());
    for j in 0..features.cols() {
        let mut vals = features.column(j);
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals.dedup();
        let e = if vals.len() <= n_bins {
            vals.windows(2).map(|w| (w[0] + w[1]) / 2.0).collect()
        } else {
            let mut cuts: Vec<f64> = (1..n_bins)
                .map(|k| vals[k * vals.len() / n_bins])
                .collect();
            cuts.dedup();
            cuts
        };
        edges.push(e);
    }
    edges
}

#[inline]
fn bin_of(edges: &[f64], x: f64) -> usize {
    edges.partition_point(|&e| e < x)
}

struct TreeBuilder<'a> {
    codes: &'a [u16],
    d: usize,
    n_code_bins: Vec<usize>,
    grad: &'a [f64],
    hess: &'a [f64],
    edges: &'a [Vec<f64>],
    max_depth: usize,
    min_leaf: usize,
    nodes: Vec<Node>,
}

impl<'a> TreeBuilder<'a> {
    fn gain_term(g: f64, h: f64) -> f64 {
        g * g / h.max(MIN_HESSIAN)
    }

    fn leaf(&mut self, rows: &[usize]) -> usize {
        let g: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let value = (-g / h.max(MIN_HESSIAN)).clamp(-MAX_LEAF, MAX_LEAF);
        self.nodes.push(Node::Leaf { value });
        self.nodes.len() - 1
    }

    fn build(&mut self, rows: &mut [usize], depth: usize) -> usize {
        if depth >= self.max_depth || rows.len() < 2 * self.min_leaf {
            return self.leaf(rows);
        }
        let g_total: f64 = rows.iter().map(|&i| self.grad[i]).sum();
        let h_total: f64 = rows.iter().map(|&i| self.hess[i]).sum();
        let parent_term = Self::gain_term(g_total, h_total);

        let mut best: Option<(f64, usize, usize)> = None; // (gain, feature, bin)
        for f in 0..self.d {
            let nb = self.n_code_bins[f];
            if nb < 2 {
                continue;
            }
            let mut hist_g = vec![0.0; nb];
            let mut hist_h = vec![0.0; nb];
            let mut hist_c = vec![0usize; nb];
            for &i in rows.iter() {
                let b = self.codes[i * self.d + f] as usize;
                hist_g[b] += self.grad[i];
                hist_h[b] += self.hess[i];
                hist_c[b] += 1;
            }
            let (mut gl, mut hl, mut cl) = (0.0, 0.0, 0usize);
            for b in 0..nb - 1 {
                gl += hist_g[b];
                hl += hist_h[b];
                cl += hist_c[b];
                let cr = rows.len() - cl;
                if cl < self.min_leaf || cr < self.min_leaf {
                    continue;
                }
                let gain = Self::gain_term(gl, hl) + Self::gain_term(g_total - gl, h_total - hl)
                    - parent_term;
                if gain > MIN_GAIN && best.is_none_or(|(bg, _, _)| gain > bg) {
                    best = Some((gain, f, b));
                }
            }
        }

        let Some((_, feature, bin)) = best else {
            return self.leaf(rows);
        };
        let threshold = self.edges[feature][bin];
        let mid = partition(rows, |i| (self.codes[i * self.d + feature] as usize) <= bin);
        let node_idx = self.nodes.len();
        self.nodes.push(Node::Leaf { value: 0.0 }); // placeholder
        let (left_rows, right_rows) = rows.split_at_mut(mid);
        let left = self.build(left_rows, depth + 1);
        let right = self.build(right_rows, depth + 1);
        self.nodes[node_idx] = Node::Split {
            feature,
            threshold,
            left,
            right,
        };
        node_idx
    }
}

/// Stable partition: rows satisfying `pred` move to the front; returns the
/// boundary index.
fn partition(rows: &mut [usize], pred: impl Fn(usize) -> bool) -> usize {
    let mut left: Vec<usize> = Vec::with_capacity(rows.len());
    let mut right: Vec<usize> = Vec::with_capacity(rows.len());
    for &i in rows.iter() {
        if pred(i) {
            left.push(i);
        } else {
            right.push(i);
        }
    }
    let mid = left.len();
    rows[..mid].copy_from_slice(&left);
    rows[mid..].copy_from_slice(&right);
    mid
}

/// Trains the boosted model. With a validation set, stops once validation
/// AUC has not improved for `early_stopping_rounds` rounds and keeps the
/// best-round prefix of trees.
pub fn train_gbdt(train: &Dataset, val: Option<&Dataset>, cfg: &GbdtConfig) -> Result<GbdtModel> {
    cfg.validate()?;
    let n = train.n_rows();
    if n < 2 * cfg.min_samples_leaf {
        return Err(Error::Data(format!(
            "need at least {} rows (2·min_samples_leaf), got {n}",
            2 * cfg.min_samples_leaf
        )));
    }
    let y = train.labels_f64();
    let prevalence = train.prevalence();
    let base_score = logit(prevalence);

    if !train.has_both_classes() {
        return Ok(GbdtModel {
            format_version: GBDT_FORMAT_VERSION.into(),
            trees: Vec::new(),
            base_score,
            learning_rate: cfg.learning_rate,
            bin_edges: vec![Vec::new(); train.n_features()],
            n_features: train.n_features(),
            config: cfg.clone(),
            history: Vec::new(),
            warning: Some("single-class training labels; constant model".into()),
        });
    }
    if let Some(v) = val {
        if !v.has_both_classes() {
            return Err(Error::Data(
                "validation set has a single class; AUC is undefined".into(),
            ));
        }
    }

    let d = train.n_features();
    let edges = compute_bin_edges(&train.features, cfg.n_bins);
    let n_code_bins: Vec<usize> = edges.iter().map(|e| e.len() + 1).collect();
    let mut codes = vec![0u16; n * d];
    for i in 0..n {
        let row = train.features.row(i);
        for (f, &x) in row.iter().enumerate() {
            codes[i * d + f] = bin_of(&edges[f], x) as u16;
        }
    }

    let mut scores = vec![base_score; n];
    let mut val_scores: Vec<f64> = val.map(|v| vec![base_score; v.n_rows()]).unwrap_or_default();
    let val_labels: Vec<f64> = val.map(|v| v.labels_f64()).unwrap_or_default();

    let mut trees: Vec<Tree> = Vec::new();
    let mut history: Vec<RoundStats> = Vec::new();
    let mut best_round: Option<usize> = None;
    let mut best_auc = f64::NEG_INFINITY;

    for round in 0..cfg.n_estimators {
        let mut grad = Vec::with_capacity(n);
        let mut hess = Vec::with_capacity(n);
        for (&s, &yi) in scores.iter().zip(&y) {
            let p = sigmoid(s);
            grad.push(p - yi);
            hess.push(p * (1.0 - p));
        }
        let mut builder = TreeBuilder {
            codes: &codes,
            d,
            n_code_bins: n_code_bins.clone(),
            grad: &grad,
            hess: &hess,
            edges: &edges,
            max_depth: cfg.max_depth,
            min_leaf: cfg.min_samples_leaf,
            nodes: Vec::new(),
        };
        let mut rows: Vec<usize> = (0..n).collect();
        builder.build(&mut rows, 0);
        let tree = Tree {
            nodes: builder.nodes,
        };

        for (i, s) in scores.iter_mut().enumerate() {
            *s += cfg.learning_rate * tree.eval(train.features.row(i));
        }
        let train_loss = mean_logistic_loss(&scores, &y);
        if !train_loss.is_finite() {
            return Err(Error::Numerical(format!(
                "non-finite boosting loss at round {round}"
            )));
        }
        trees.push(tree);

        let mut val_auc = None;
        if let Some(v) = val {
            let t = trees.last().unwrap();
            for (i, s) in val_scores.iter_mut().enumerate() {
                *s += cfg.learning_rate * t.eval(v.features.row(i));
            }
            let a = auc(&val_scores, &val_labels)?;
            val_auc = Some(a);
            if a > best_auc {
                best_auc = a;
                best_round = Some(round);
            } else if round - best_round.unwrap() >= cfg.early_stopping_rounds {
                history.push(RoundStats {
                    train_loss,
                    val_auc,
                });
                break;
            }
        }
        history.push(RoundStats {
            train_loss,
            val_auc,
        });
    }

    if let Some(b) = best_round {
        trees.truncate(b + 1);
    }

    Ok(GbdtModel {
        format_version: GBDT_FORMAT_VERSION.into(),
        trees,
        base_score,
        learning_rate: cfg.learning_rate,
        bin_edges: edges,
        n_features: d,
        config: cfg.clone(),
        history,
        warning: None,
    })
}

fn mean_logistic_loss(scores: &[f64], y: &[f64]) -> f64 {
    // -[y ln p + (1-y) ln(1-p)] in the numerically stable log-sum-exp form
    scores
        .iter()
        .zip(y)
        .map(|(&s, &yi)| s.max(0.0) - s * yi + (1.0 + (-s.abs()).exp()).ln())
        .sum::<f64>()
        / y.len() as f64
}

/// Prediction helper mirroring the free-function call convention used by
/// the evaluation protocols.
pub fn predict_gbdt(model: &GbdtModel, rows: &Mat) -> Result<Vec<f64>> {
    model.predict_proba(rows)
}
