//! Per-quintile performance audit.

use serde::Serialize;

use crate::classifier::ProbScorer;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::eval::metrics::auc;

#[derive(Debug, Clone, Serialize)]
pub struct EquityRow {
    pub quintile: u8,
    pub n: usize,
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct EquityReport {
    pub rows: Vec<EquityRow>,
    /// Richest-to-poorest AUC ratio; absent when either side is undefined.
    pub q5_q1_ratio: Option<f64>,
}

/// AUC per wealth quintile (a disjoint, exhaustive partition of the rows)
/// plus the Q5/Q1 ratio. Single-class quintiles are flagged.
pub fn equity_audit<S: ProbScorer>(scorer: &S, data: &Dataset) -> Result<EquityReport> {
    if data.n_rows() == 0 {
        return Err(Error::Data("empty dataset".into()));
    }
    let probs = scorer.predict_proba(&data.features)?;
    let labels = data.labels_f64();
    let mut rows = Vec::with_capacity(5);
    for q in 1..=5u8 {
        let idx: Vec<usize> = (0..data.n_rows())
            .filter(|&i| data.wealth_quintile[i] == q)
            .collect();
        if idx.is_empty() {
            rows.push(EquityRow {
                quintile: q,
                n: 0,
                auc: None,
                flag: Some("empty quintile".into()),
            });
            continue;
        }
        let p: Vec<f64> = idx.iter().map(|&i| probs[i]).collect();
        let y: Vec<f64> = idx.iter().map(|&i| labels[i]).collect();
        match auc(&p, &y) {
            Ok(a) => rows.push(EquityRow {
                quintile: q,
                n: idx.len(),
                auc: Some(a),
                flag: None,
            }),
            Err(Error::UndefinedMetric(_)) => rows.push(EquityRow {
                quintile: q,
                n: idx.len(),
                auc: None,
                flag: Some("AUC undefined: single class".into()),
            }),
            Err(e) => return Err(e),
        }
    }
    let q1 = rows[0].auc;
    let q5 = rows[4].auc;
    let ratio = match (q1, q5) {
        (Some(a1), Some(a5)) if a1 > 0.0 => Some(a5 / a1),
        _ => None,
    };
    Ok(EquityReport {
        rows,
        q5_q1_ratio: ratio,
    })
}
