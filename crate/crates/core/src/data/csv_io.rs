//! CSV ingestion, harmonization, and dataset round-trip.

use std::path::Path;

use crate::data::dataset::{Dataset, Schema};
use crate::error::{Error, Result};
use crate::mat::Mat;

/// One parsed cell. Numbers parse eagerly; anything else stays text until
/// harmonization; empty cells are missing.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
    Missing,
}

/// Row-major typed table between CSV and [`Dataset`]. Feature columns come
/// first in schema order, then outcome, country, region.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub schema: Schema,
    pub rows: Vec<Vec<Cell>>,
    pub warnings: Vec<String>,
}

impl RawTable {
    pub fn n_feature_cols(&self) -> usize {
        self.schema.feature_names.len()
    }

    pub fn outcome_col(&self) -> usize {
        self.n_feature_cols()
    }

    pub fn country_col(&self) -> usize {
        self.n_feature_cols() + 1
    }

    pub fn region_col(&self) -> usize {
        self.n_feature_cols() + 2
    }
}

/// Reads a CSV with a header row into a [`RawTable`].
///
/// Required columns: every schema feature, the outcome, country, and region.
/// Unknown columns are ignored with a warning; missing required columns are
/// an error naming the first absent one.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<RawTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();

    let mut wanted: Vec<&str> = schema.feature_names.iter().map(|s| s.as_str()).collect();
    wanted.push(&schema.outcome);
    wanted.push(&schema.country);
    wanted.push(&schema.region);

    let mut col_of = Vec::with_capacity(wanted.len());
    for name in &wanted {
        match headers.iter().position(|h| h == name) {
            Some(i) => col_of.push(i),
            None => {
                return Err(Error::Schema(format!("missing required column: {name}")));
            }
        }
    }
    let mut warnings = Vec::new();
    for h in &headers {
        if !wanted.contains(&h.as_str()) {
            warnings.push(format!("ignoring unknown column: {h}"));
        }
    }

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", line + 2)))?;
        let mut row = Vec::with_capacity(wanted.len());
        for &i in &col_of {
            let cell = record.get(i).unwrap_or("").trim();
            row.push(parse_cell(cell));
        }
        rows.push(row);
    }
    Ok(RawTable {
        schema: schema.clone(),
        rows,
        warnings,
    })
}

fn parse_cell(s: &str) -> Cell {
    if s.is_empty() {
        Cell::Missing
    } else if let Ok(v) = s.parse::<f64>() {
        if v.is_finite() {
            Cell::Num(v)
        } else {
            Cell::Missing
        }
    } else {
        Cell::Text(s.to_string())
    }
}

/// Recodes categorical text into the harmonized numeric space:
/// yes/no/don't-know style answers become `{1, 0, 0}`, gender and residence
/// become `{0, 1}`, ordinal education levels become `0..=3`. Numeric cells
/// pass through untouched, so the operation is idempotent. Unmappable text
/// becomes missing with a warning.
pub fn harmonize(table: &RawTable) -> RawTable {
    let mut out = table.clone();
    let outcome_col = table.outcome_col();
    for (i, row) in out.rows.iter_mut().enumerate() {
        for (j, cell) in row.iter_mut().enumerate() {
            if j > outcome_col {
                continue; // country/region stay text
            }
            if let Cell::Text(t) = cell {
                match map_token(t) {
                    Some(v) => *cell = Cell::Num(v),
                    None => {
                        out.warnings.push(format!(
                            "row {i}: unmappable value {t:?} in column {} set to missing",
                            column_name(&table.schema, j)
                        ));
                        *cell = Cell::Missing;
                    }
                }
            }
        }
    }
    out
}

fn column_name(schema: &Schema, j: usize) -> &str {
    schema
        .feature_names
        .get(j)
        .map(|s| s.as_str())
        .unwrap_or(&schema.outcome)
}

fn map_token(t: &str) -> Option<f64> {
    let k = t.trim().to_ascii_lowercase();
    match k.as_str() {
        "yes" | "y" | "true" => Some(1.0),
        "no" | "n" | "false" | "dk" | "don't know" | "dont know" => Some(0.0),
        "male" | "m" => Some(1.0),
        "female" | "f" => Some(0.0),
        "urban" => Some(1.0),
        "rural" => Some(0.0),
        "none" | "pre-primary" => Some(0.0),
        "primary" => Some(1.0),
        "secondary" => Some(2.0),
        "higher" | "tertiary" => Some(3.0),
        _ => None,
    }
}

/// Builds a [`Dataset`] from a numerically complete table. Rows with a
/// missing outcome, country, or region are dropped with a warning; missing
/// feature cells are an error (impute first).
pub fn table_into_dataset(table: &RawTable) -> Result<(Dataset, Vec<String>)> {
    let mut warnings = table.warnings.clone();
    let d = table.n_feature_cols();
    let mut feats = Vec::new();
    let mut outcome = Vec::new();
    let mut country = Vec::new();
    let mut region = Vec::new();
    for (i, row) in table.rows.iter().enumerate() {
        let c = match &row[table.country_col()] {
            Cell::Text(t) if !t.is_empty() => t.clone(),
            Cell::Num(v) => format!("{v}"),
            _ => {
                warnings.push(format!("row {i}: missing country, row dropped"));
                continue;
            }
        };
        let r = match &row[table.region_col()] {
            Cell::Text(t) if !t.is_empty() => t.clone(),
            Cell::Num(v) => format!("{v}"),
            _ => {
                warnings.push(format!("row {i}: missing region, row dropped"));
                continue;
            }
        };
        let y = match &row[table.outcome_col()] {
            Cell::Num(v) if *v == 0.0 || *v == 1.0 => *v as u8,
            Cell::Num(v) => {
                return Err(Error::Data(format!("row {i}: outcome {v} is not binary")));
            }
            _ => {
                warnings.push(format!("row {i}: missing outcome, row dropped"));
                continue;
            }
        };
        let mut frow = Vec::with_capacity(d);
        for (j, cell) in row[..d].iter().enumerate() {
            match cell {
                Cell::Num(v) => frow.push(*v),
                _ => {
                    return Err(Error::Data(format!(
                        "row {i}: feature {} still missing after imputation",
                        column_name(&table.schema, j)
                    )));
                }
            }
        }
        feats.push(frow);
        outcome.push(y);
        country.push(c);
        region.push(r);
    }
    if feats.is_empty() {
        return Err(Error::Data("no usable rows".into()));
    }
    let n = feats.len();
    let ds = Dataset::new(
        Mat::from_rows(&feats)?,
        outcome,
        country,
        region,
        (0..n as u64).collect(),
        table.schema.feature_names.clone(),
    )?;
    Ok((ds, warnings))
}

/// Writes the dataset CSV: `row_id,country_code,region,<features>,outcome,wealth_quintile`.
///
/// Floats use Rust's shortest round-trip formatting so a read-back is
/// bit-exact and repeated runs are byte-identical.
pub fn write_dataset_csv(data: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: std::io::Error::other(e.to_string()),
    })?;
    let mut header = vec!["row_id".to_string(), "country_code".into(), "region".into()];
    header.extend(data.feature_names.iter().cloned());
    header.push("ecdi_on_track".into());
    header.push("wealth_quintile".into());
    w.write_record(&header)
        .map_err(|e| Error::Data(e.to_string()))?;
    for i in 0..data.n_rows() {
        let mut rec = vec![
            data.row_id[i].to_string(),
            data.country[i].clone(),
            data.region[i].clone(),
        ];
        rec.extend(data.features.row(i).iter().map(|v| format!("{v}")));
        rec.push(data.outcome[i].to_string());
        rec.push(data.wealth_quintile[i].to_string());
        w.write_record(&rec).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush().map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(())
}

/// Reads a dataset CSV produced by [`write_dataset_csv`] (or any complete
/// numeric file with the same columns). `row_id` and `wealth_quintile` are
/// optional; absent ids are assigned sequentially, quintiles recomputed.
pub fn read_dataset_csv(path: &Path) -> Result<Dataset> {
    let schema = Schema::default();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| Error::Io {
            path: path.display().to_string(),
            source: std::io::Error::other(e.to_string()),
        })?;
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| Error::Data(format!("cannot read header: {e}")))?
        .iter()
        .map(|h| h.trim().to_string())
        .collect();
    let find = |name: &str| headers.iter().position(|h| h == name);
    let mut feat_cols = Vec::new();
    for f in &schema.feature_names {
        feat_cols.push(
            find(f).ok_or_else(|| Error::Schema(format!("missing required column: {f}")))?,
        );
    }
    let outcome_col =
        find(&schema.outcome).ok_or_else(|| Error::Schema("missing required column: ecdi_on_track".into()))?;
    let country_col =
        find(&schema.country).ok_or_else(|| Error::Schema("missing required column: country_code".into()))?;
    let region_col =
        find(&schema.region).ok_or_else(|| Error::Schema("missing required column: region".into()))?;
    let row_id_col = find("row_id");

    let mut feats = Vec::new();
    let mut outcome = Vec::new();
    let mut country = Vec::new();
    let mut region = Vec::new();
    let mut row_ids = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::Data(format!("row {}: {e}", line + 2)))?;
        let get = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let mut frow = Vec::with_capacity(feat_cols.len());
        for (&i, name) in feat_cols.iter().zip(&schema.feature_names) {
            let v: f64 = get(i).parse().map_err(|_| {
                Error::Data(format!(
                    "row {}: feature {name} is not numeric (run ingest for raw files)",
                    line + 2
                ))
            })?;
            frow.push(v);
        }
        let y: f64 = get(outcome_col)
            .parse()
            .map_err(|_| Error::Data(format!("row {}: outcome is not numeric", line + 2)))?;
        if y != 0.0 && y != 1.0 {
            return Err(Error::Data(format!("row {}: outcome {y} is not binary", line + 2)));
        }
        feats.push(frow);
        outcome.push(y as u8);
        country.push(get(country_col));
        region.push(get(region_col));
        if let Some(rc) = row_id_col {
            let id: u64 = get(rc)
                .parse()
                .map_err(|_| Error::Data(format!("row {}: bad row_id", line + 2)))?;
            row_ids.push(id);
        }
    }
    if feats.is_empty() {
        return Err(Error::Data("no rows".into()));
    }
    let n = feats.len();
    let ids = if row_ids.len() == n {
        row_ids
    } else {
        (0..n as u64).collect()
    };
    Dataset::new(
        Mat::from_rows(&feats)?,
        outcome,
        country,
        region,
        ids,
        schema.feature_names.clone(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::FEATURE_NAMES;
    use std::io::Write;

    fn write_temp(content: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        f
    }

    fn full_header() -> String {
        let mut h: Vec<&str> = FEATURE_NAMES.to_vec();
        h.push("ecdi_on_track");
        h.push("country_code");
        h.push("region");
        h.join(",")
    }

    fn full_row(fill: &str) -> String {
        let mut r = vec![fill; FEATURE_NAMES.len()];
        r.push("1");
        r.push("NGA");
        r.push("WA");
        r.join(",")
    }

    #[test]
    fn extra_column_warns_but_loads() {
        let content = format!("{},notes\n{},hello\n", full_header(), full_row("1"));
        let f = write_temp(&content);
        let t = load_csv(f.path(), &Schema::default()).unwrap();
        assert_eq!(t.rows.len(), 1);
        assert!(t.warnings.iter().any(|w| w.contains("notes")));
    }

    #[test]
    fn missing_required_column_is_named() {
        let header: Vec<&str> = FEATURE_NAMES.iter().copied().filter(|&f| f != "books").collect();
        let content = format!(
            "{},ecdi_on_track,country_code,region\n",
            header.join(",")
        );
        let f = write_temp(&content);
        let err = load_csv(f.path(), &Schema::default()).unwrap_err();
        assert_eq!(err.to_string(), "schema error: missing required column: books");
    }

    #[test]
    fn harmonize_maps_yes_no_dk() {
        let content = format!(
            "{}\n{}\n{}\n{}\n",
            full_header(),
            full_row("Yes"),
            full_row("DK"),
            full_row("maybe")
        );
        let f = write_temp(&content);
        let t = harmonize(&load_csv(f.path(), &Schema::default()).unwrap());
        assert_eq!(t.rows[0][7], Cell::Num(1.0)); // diarrhea: Yes → 1
        assert_eq!(t.rows[1][7], Cell::Num(0.0)); // DK → 0
        assert_eq!(t.rows[2][7], Cell::Missing); // maybe → missing + flag
        assert!(t.warnings.iter().any(|w| w.contains("maybe")));
    }

    #[test]
    fn harmonize_is_idempotent() {
        let content = format!(
            "{}\n{}\n{}\n",
            full_header(),
            full_row("yes"),
            full_row("0.5")
        );
        let f = write_temp(&content);
        let t1 = harmonize(&load_csv(f.path(), &Schema::default()).unwrap());
        let t2 = harmonize(&t1);
        assert_eq!(t1.rows, t2.rows);
    }

    #[test]
    fn dataset_csv_round_trip_is_exact() {
        let ds = crate::data::dataset::tests::tiny_dataset(120, &["A", "B"]);
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("ds.csv");
        write_dataset_csv(&ds, &p).unwrap();
        let back = read_dataset_csv(&p).unwrap();
        assert_eq!(ds, back);
    }
}
