//! Discrimination and calibration metrics.

use crate::error::{Error, Result};

fn validate_binary(labels: &[f64]) -> Result<(usize, usize)> {
    let mut pos = 0;
    let mut neg = 0;
    for &y in labels {
        if y == 1.0 {
            pos += 1;
        } else if y == 0.0 {
            neg += 1;
        } else {
            return Err(Error::Data(format!("label {y} is not binary")));
        }
    }
    Ok((pos, neg))
}

/// ROC AUC via the Mann–Whitney statistic: a single sort with mid-ranks for
/// ties, exactly equal to pairwise counting with ties scored ½.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if scores.iter().any(|s| !s.is_finite()) {
        return Err(Error::Data("scores must be finite".into()));
    }
    let (pos, neg) = validate_binary(labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric(
            "AUC needs both classes present".into(),
        ));
    }
    let n = scores.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());

    let mut rank_sum_pos = 0.0;
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        // 1-based ranks i+1 ..= j+1 share the mid-rank
        let mid = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            if labels[k] == 1.0 {
                rank_sum_pos += mid;
            }
        }
        i = j + 1;
    }
    let pos = pos as f64;
    let neg = neg as f64;
    Ok((rank_sum_pos - pos * (pos + 1.0) / 2.0) / (pos * neg))
}

/// O(n²) pairwise AUC used as the independent oracle in tests and the
/// acceptance suite: ties between a positive and a negative count ½.
pub fn auc_pair_count(scores: &[f64], labels: &[f64]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::Shape("length mismatch".into()));
    }
    let (pos, neg) = validate_binary(labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::UndefinedMetric("both classes required".into()));
    }
    let mut wins = 0.0;
    for (i, (&si, &yi)) in scores.iter().zip(labels).enumerate() {
        if yi != 1.0 {
            continue;
        }
        for (&sj, &yj) in scores.iter().zip(labels) {
            if yj != 0.0 {
                continue;
            }
            if si > sj {
                wins += 1.0;
            } else if si == sj {
                wins += 0.5;
            }
        }
        let _ = i;
    }
    Ok(wins / (pos as f64 * neg as f64))
}

/// Mean squared error between predicted probabilities and binary outcomes.
pub fn brier(probs: &[f64], labels: &[f64]) -> Result<f64> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Shape("need equal, non-empty vectors".into()));
    }
    validate_binary(labels)?;
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Data("probabilities must lie in [0, 1]".into()));
    }
    Ok(probs
        .iter()
        .zip(labels)
        .map(|(p, y)| (p - y) * (p - y))
        .sum::<f64>()
        / probs.len() as f64)
}

/// One reliability bin: predicted-probability band, mean confidence, and
/// observed accuracy.
#[derive(Debug, Clone, serde::Serialize)]
pub struct ReliabilityBin {
    pub lo: f64,
    pub hi: f64,
    pub count: usize,
    pub confidence: f64,
    pub accuracy: f64,
}

/// Expected calibration error over `n_bins` equal-width bins on [0, 1]:
/// `Σ_b (|b|/n)·|acc_b − conf_b|`, empty bins skipped.
pub fn ece(probs: &[f64], labels: &[f64], n_bins: usize) -> Result<f64> {
    Ok(reliability_bins(probs, labels, n_bins)?
        .iter()
        .map(|b| (b.count as f64 / probs.len() as f64) * (b.accuracy - b.confidence).abs())
        .sum())
}

pub fn reliability_bins(
    probs: &[f64],
    labels: &[f64],
    n_bins: usize,
) -> Result<Vec<ReliabilityBin>> {
    if n_bins == 0 {
        return Err(Error::Config("n_bins must be >= 1".into()));
    }
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Shape("need equal, non-empty vectors".into()));
    }
    validate_binary(labels)?;
    if probs.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::Data("probabilities must lie in [0, 1]".into()));
    }
    let mut sum_p = vec![0.0; n_bins];
    let mut sum_y = vec![0.0; n_bins];
    let mut count = vec![0usize; n_bins];
    for (&p, &y) in probs.iter().zip(labels) {
        let b = ((p * n_bins as f64) as usize).min(n_bins - 1);
        sum_p[b] += p;
        sum_y[b] += y;
        count[b] += 1;
    }
    let width = 1.0 / n_bins as f64;
    Ok((0..n_bins)
        .filter(|&b| count[b] > 0)
        .map(|b| ReliabilityBin {
            lo: b as f64 * width,
            hi: (b + 1) as f64 * width,
            count: count[b],
            confidence: sum_p[b] / count[b] as f64,
            accuracy: sum_y[b] / count[b] as f64,
        })
        .collect())
}
