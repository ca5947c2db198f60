//! Median and chained-equation imputation over raw tables.

use crate::data::csv_io::{table_into_dataset, Cell, RawTable};
use crate::data::dataset::Dataset;
use crate::error::{Error, Result};
use crate::mat::{cholesky_solve, Mat};

/// Features missing more than this fraction are rejected outright.
const MAX_MISSING_FRACTION: f64 = 0.5;

/// Ridge penalty (per standardized predictor) for the chained sweeps.
const RIDGE_LAMBDA: f64 = 1e-3;

/// Whether the outcome participates in chained imputation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ImputeProtocol {
    /// Outcome excluded from every imputation regression (no leakage into
    /// features; required for model benchmarks).
    Blind,
    /// Outcome included as a predictor (preserves joint distributions for
    /// inferential analyses).
    Congenial,
}

/// Fills each missing feature cell with the median of that feature's
/// observed cells.
pub fn impute_median(table: &RawTable) -> Result<(Dataset, Vec<String>)> {
    let filled = median_fill(table)?;
    table_into_dataset(&filled)
}

fn median_fill(table: &RawTable) -> Result<RawTable> {
    let mut out = table.clone();
    let d = table.n_feature_cols();
    for j in 0..d {
        let mut observed: Vec<f64> = table
            .rows
            .iter()
            .filter_map(|r| match &r[j] {
                Cell::Num(v) => Some(*v),
                _ => None,
            })
            .collect();
        let n_missing = table.rows.len() - observed.len();
        if n_missing == 0 {
            continue;
        }
        check_missingness(&table.schema.feature_names[j], n_missing, table.rows.len())?;
        observed.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let m = observed.len();
        let median = if m % 2 == 1 {
            observed[m / 2]
        } else {
            (observed[m / 2 - 1] + observed[m / 2]) / 2.0
        };
        for row in &mut out.rows {
            if !matches!(row[j], Cell::Num(_)) {
                row[j] = Cell::Num(median);
            }
        }
    }
    Ok(out)
}

fn check_missingness(name: &str, n_missing: usize, n: usize) -> Result<()> {
    if n_missing == n {
        return Err(Error::Data(format!("feature {name} has no observed values")));
    }
    let frac = n_missing as f64 / n as f64;
    if frac >= MAX_MISSING_FRACTION {
        return Err(Error::Data(format!(
            "feature {name} is {:.0}% missing (limit {:.0}%)",
            frac * 100.0,
            MAX_MISSING_FRACTION * 100.0
        )));
    }
    Ok(())
}

/// Round-robin regression imputation: after a median warm start, each
/// feature with missing cells is regressed (ridge, standardized design) on
/// the other features — plus the outcome under [`ImputeProtocol::Congenial`]
/// — and its missing cells are re-predicted, for `iterations` sweeps.
pub fn impute_chained(
    table: &RawTable,
    iterations: usize,
    protocol: ImputeProtocol,
) -> Result<(Dataset, Vec<String>)> {
    let d = table.n_feature_cols();
    let n = table.rows.len();
    if n == 0 {
        return Err(Error::Data("empty table".into()));
    }

    // which feature cells were originally missing
    let missing: Vec<Vec<usize>> = (0..d)
        .map(|j| {
            (0..n)
                .filter(|&i| !matches!(table.rows[i][j], Cell::Num(_)))
                .collect()
        })
        .collect();
    for j in 0..d {
        if !missing[j].is_empty() {
            check_missingness(&table.schema.feature_names[j], missing[j].len(), n)?;
        }
    }

    let mut filled = median_fill(table)?;
    let mut warnings = Vec::new();
    if missing.iter().all(|m| m.is_empty()) {
        return table_into_dataset(&filled);
    }

    // outcome values for the congenial protocol; rows with a missing outcome
    // contribute 0.5 (they are dropped later anyway)
    let outcome: Vec<f64> = (0..n)
        .map(|i| match &table.rows[i][table.outcome_col()] {
            Cell::Num(v) => *v,
            _ => 0.5,
        })
        .collect();

    for _ in 0..iterations {
        for j in 0..d {
            if missing[j].is_empty() {
                continue;
            }
            let observed: Vec<usize> = (0..n).filter(|i| !missing[j].contains(i)).collect();
            match ridge_sweep(&mut filled, j, &observed, &missing[j], &outcome, protocol) {
                Ok(()) => {}
                Err(_) => {
                    warnings.push(format!(
                        "feature {}: degenerate design, kept median fill",
                        table.schema.feature_names[j]
                    ));
                }
            }
        }
    }
    let (ds, mut w) = table_into_dataset(&filled)?;
    w.extend(warnings);
    Ok((ds, w))
}

/// One ridge regression of feature `j` on the current values of the other
/// columns; predictions overwrite the originally-missing cells only.
fn ridge_sweep(
    filled: &mut RawTable,
    j: usize,
    observed: &[usize],
    missing: &[usize],
    outcome: &[f64],
    protocol: ImputeProtocol,
) -> Result<()> {
    let d = filled.n_feature_cols();
    let predictors: Vec<usize> = (0..d).filter(|&k| k != j).collect();
    let use_outcome = protocol == ImputeProtocol::Congenial;
    let p = predictors.len() + usize::from(use_outcome);

    let value_at = |table: &RawTable, i: usize, k: usize| -> f64 {
        match &table.rows[i][k] {
            Cell::Num(v) => *v,
            _ => unreachable!("median fill left a hole"),
        }
    };

    // standardize the design on the observed rows
    let mut mean = vec![0.0; p];
    let mut var = vec![0.0; p];
    let design_cell = |table: &RawTable, i: usize, c: usize| -> f64 {
        if c < predictors.len() {
            value_at(table, i, predictors[c])
        } else {
            outcome[i]
        }
    };
    for &i in observed {
        for c in 0..p {
            mean[c] += design_cell(filled, i, c);
        }
    }
    for m in &mut mean {
        *m /= observed.len() as f64;
    }
    for &i in observed {
        for c in 0..p {
            let e = design_cell(filled, i, c) - mean[c];
            var[c] += e * e;
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|v| (v / observed.len() as f64).sqrt())
        .collect();
    if std.iter().all(|&s| s <= 1e-12) {
        return Err(Error::Data("all predictors degenerate".into()));
    }
    let z = |table: &RawTable, i: usize, c: usize| -> f64 {
        if std[c] <= 1e-12 {
            0.0
        } else {
            (design_cell(table, i, c) - mean[c]) / std[c]
        }
    };

    // normal equations with an intercept handled via target centering
    let y_mean = observed.iter().map(|&i| value_at(filled, i, j)).sum::<f64>()
        / observed.len() as f64;
    let mut xtx = Mat::zeros(p, p);
    let mut xty = vec![0.0; p];
    for &i in observed {
        let zi: Vec<f64> = (0..p).map(|c| z(filled, i, c)).collect();
        let yi = value_at(filled, i, j) - y_mean;
        for a in 0..p {
            xty[a] += zi[a] * yi;
            for b in 0..p {
                xtx.set(a, b, xtx.get(a, b) + zi[a] * zi[b]);
            }
        }
    }
    let lambda = RIDGE_LAMBDA * observed.len() as f64;
    for a in 0..p {
        xtx.set(a, a, xtx.get(a, a) + lambda);
    }
    let w = cholesky_solve(&xtx, &xty)?;

    for &i in missing {
        let pred = y_mean
            + (0..p)
                .map(|c| w[c] * z(filled, i, c))
                .sum::<f64>();
        filled.rows[i][j] = Cell::Num(pred);
    }
    Ok(())
}
