//! Report containers shared by the evaluation protocols.

use serde::Serialize;

/// One group's metric in a per-group breakdown (country, region, quintile).
#[derive(Debug, Clone, Serialize)]
pub struct GroupRow {
    pub group: String,
    pub n: usize,
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub flag: Option<String>,
}

/// Metric value with its bootstrap CI and optional per-group table.
///
/// The interval is a percentile bootstrap: `ci_low ≤ ci_high` always holds,
/// but the point estimate may legitimately fall outside the interval.
#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub metric: String,
    pub point: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n_resamples: usize,
    pub per_group: Vec<GroupRow>,
    pub seed: u64,
    pub config: serde_json::Value,
}

impl EvalReport {
    /// Aligned-column text rendering for terminals.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{}: {:.6}  95% CI [{:.6}, {:.6}]  ({} resamples, seed {})\n",
            self.metric, self.point, self.ci_low, self.ci_high, self.n_resamples, self.seed
        );
        if !self.per_group.is_empty() {
            let w = self
                .per_group
                .iter()
                .map(|g| g.group.len())
                .max()
                .unwrap_or(5)
                .max(5);
            out.push_str(&format!("{:<w$}  {:>8}  {:>10}\n", "group", "n", self.metric));
            for g in &self.per_group {
                match g.value {
                    Some(v) => out.push_str(&format!("{:<w$}  {:>8}  {:>10.6}\n", g.group, g.n, v)),
                    None => out.push_str(&format!(
                        "{:<w$}  {:>8}  {:>10}  ({})\n",
                        g.group,
                        g.n,
                        "--",
                        g.flag.as_deref().unwrap_or("undefined")
                    )),
                }
            }
        }
        out
    }
}

/// Linear-interpolation percentile (the convention NumPy defaults to);
/// `q` in [0, 1].
pub fn percentile(values: &[f64], q: f64) -> f64 {
    assert!(!values.is_empty(), "percentile of empty slice");
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() - 1) as f64 * q.clamp(0.0, 1.0);
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    if lo == hi {
        v[lo]
    } else {
        v[lo] + (h - lo as f64) * (v[hi] - v[lo])
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn percentile_interpolates() {
        let v = [4.0, 1.0, 3.0, 2.0];
        assert_eq!(percentile(&v, 0.0), 1.0);
        assert_eq!(percentile(&v, 1.0), 4.0);
        assert_eq!(percentile(&v, 0.5), 2.5);
    }

    #[test]
    fn degenerate_distribution_gives_degenerate_interval() {
        let v = [0.7; 100];
        assert_eq!(percentile(&v, 0.025), 0.7);
        assert_eq!(percentile(&v, 0.975), 0.7);
    }
}
