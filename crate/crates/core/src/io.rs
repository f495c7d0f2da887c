//! CSV ingestion and emission helpers.

use std::io::Read;

use crate::data::Dataset;
use crate::error::{Error, Result};

/// Reads a headed CSV of finite numbers. Every row must have as many fields as
/// the header. Errors carry the 1-based line number of the offending record.
pub fn read_numeric_csv<R: Read>(reader: R, expected_header: Option<&[&str]>) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let header = rdr
        .headers()
        .map_err(|e| Error::data(Some(1), e.to_string()))?
        .clone();
    if header.is_empty() {
        return Err(Error::data(Some(1), "missing header"));
    }
    if let Some(expected) = expected_header {
        let got: Vec<&str> = header.iter().collect();
        if got != expected {
            return Err(Error::data(
                Some(1),
                format!("expected header {:?}, found {:?}", expected.join(","), got.join(",")),
            ));
        }
    }
    let width = header.len();
    let mut rows = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| {
            let line = e.position().map(|p| p.line() as usize);
            Error::data(line, e.to_string())
        })?;
        let line = record.position().map(|p| p.line() as usize);
        if record.len() != width {
            return Err(Error::data(
                line,
                format!("expected {width} fields, found {}", record.len()),
            ));
        }
        let mut row = Vec::with_capacity(width);
        for field in record.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::data(line, format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::data(line, format!("non-finite value: {field:?}")));
            }
            row.push(v);
        }
        rows.push(row);
    }
    Ok(rows)
}

pub fn read_dataset<R: Read>(reader: R) -> Result<Dataset> {
    let rows = read_numeric_csv(reader, None)?;
    if rows.is_empty() {
        return Err(Error::data(None, "dataset has no rows"));
    }
    let d = rows[0].len();
    Dataset::new(rows.into_iter().flatten().collect(), d)
}

/// Header `x1,...,xd` then one row per point.
pub fn dataset_to_csv(data: &Dataset) -> String {
    let mut out = (1..=data.dim())
        .map(|i| format!("x{i}"))
        .collect::<Vec<_>>()
        .join(",");
    out.push('\n');
    for p in data.rows() {
        let line = p.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",");
        out.push_str(&line);
        out.push('\n');
    }
    out
}
