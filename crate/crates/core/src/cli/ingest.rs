use std::collections::HashSet;
use std::path::Path;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::linmodel::FactorLabels;

/// A parsed input table: one label and `q` responses per sample.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub labels: FactorLabels,
    pub values: Array2<f64>,
    pub responses: Vec<String>,
}

/// Frequency matrix as written to `frequencies.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencyTable {
    pub levels: Vec<String>,
    pub responses: Vec<String>,
    pub values: Array2<f64>,
}

fn reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    Ok(csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)?)
}

fn unique_names(fields: impl Iterator<Item = String>, what: &str) -> Result<Vec<String>> {
    let names: Vec<String> = fields.collect();
    let mut seen = HashSet::new();
    for name in &names {
        if name.is_empty() {
            return Err(Error::invalid(format!("empty {what} name in header")));
        }
        if !seen.insert(name.as_str()) {
            return Err(Error::invalid(format!("duplicate {what} name {name:?}")));
        }
    }
    Ok(names)
}

/// Read a sample table. The header is `condition` followed by the response
/// names; every data row is a level label followed by one finite number per
/// response. Rows and columns in error messages are 1-based data rows and
/// response columns.
pub fn ingest_csv(path: &Path) -> Result<Dataset> {
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::invalid(format!("{} is empty", path.display()))),
    };
    if header.get(0) != Some("condition") {
        return Err(Error::invalid(format!(
            "first header field must be \"condition\", found {:?}",
            header.get(0).unwrap_or("")
        )));
    }
    let responses = unique_names(header.iter().skip(1).map(str::to_string), "response")?;
    let q = responses.len();
    if q == 0 {
        return Err(Error::invalid("no response columns"));
    }

    let mut labels = Vec::new();
    let mut data = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        let row = r + 1;
        if rec.len() == 1 && rec[0].is_empty() {
            continue;
        }
        if rec.len() != q + 1 {
            return Err(Error::invalid(format!(
                "row {row} has {} fields, expected {}",
                rec.len(),
                q + 1
            )));
        }
        if rec[0].is_empty() {
            return Err(Error::invalid(format!("row {row} has an empty condition label")));
        }
        labels.push(rec[0].to_string());
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let col = j + 1;
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") || cell.eq_ignore_ascii_case("na") {
                return Err(Error::invalid(format!("missing value at row {row}, column {col}")));
            }
            let v: f64 = cell.parse().map_err(|_| {
                Error::invalid(format!("non-numeric value {cell:?} at row {row}, column {col}"))
            })?;
            if !v.is_finite() {
                return Err(Error::invalid(format!("non-finite value at row {row}, column {col}")));
            }
            data.push(v);
        }
    }
    if labels.is_empty() {
        return Err(Error::invalid("no data rows"));
    }
    let labels = FactorLabels::new(&labels)?;
    for (level, count) in labels.levels().iter().zip(labels.counts()) {
        if count < 2 {
            log::warn!("level {level:?} has only {count} sample");
        }
    }
    let values = Array2::from_shape_vec((labels.n(), q), data).expect("row lengths checked");
    Ok(Dataset {
        labels,
        values,
        responses,
    })
}

/// Decimal with 17 significant digits, enough to recover any `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn write_frequencies(path: &Path, table: &FrequencyTable) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(std::iter::once("level").chain(table.responses.iter().map(String::as_str)))?;
    for (level, row) in table.levels.iter().zip(table.values.rows()) {
        w.write_record(std::iter::once(level.clone()).chain(row.iter().map(|&v| fmt_f64(v))))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_frequencies(path: &Path) -> Result<FrequencyTable> {
    let mut rdr = reader(path)?;
    let mut records = rdr.records();
    let header = match records.next() {
        Some(h) => h?,
        None => return Err(Error::invalid(format!("{} is empty", path.display()))),
    };
    let responses = unique_names(header.iter().skip(1).map(str::to_string), "response")?;
    let mut levels = Vec::new();
    let mut data = Vec::new();
    for (r, rec) in records.enumerate() {
        let rec = rec?;
        if rec.len() != responses.len() + 1 {
            return Err(Error::invalid(format!("row {} of frequency table is ragged", r + 1)));
        }
        levels.push(rec[0].to_string());
        for cell in rec.iter().skip(1) {
            data.push(
                cell.parse::<f64>()
                    .map_err(|_| Error::invalid(format!("bad frequency {cell:?}")))?,
            );
        }
    }
    let values = Array2::from_shape_vec((levels.len(), responses.len()), data).expect("row lengths checked");
    Ok(FrequencyTable {
        levels,
        responses,
        values,
    })
}
