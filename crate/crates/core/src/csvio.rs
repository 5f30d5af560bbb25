//! CSV helpers: atomic file writes and a generic numeric table reader.

use crate::error::{Error, Result};
use std::path::Path;

/// Writes `contents` to `path` atomically: the bytes go to a temporary file
/// in the same directory which is then renamed over the target, so a crash
/// mid-write never leaves a truncated file behind.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty());
    let file_name = path
        .file_name()
        .ok_or_else(|| Error::invalid(format!("output path {} has no file name", path.display())))?;
    let tmp = match dir {
        Some(d) => d.join(format!(".{}.tmp", file_name.to_string_lossy())),
        None => Path::new(&format!(".{}.tmp", file_name.to_string_lossy())).to_path_buf(),
    };
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Formats an `f64` for CSV output (shortest round-trip representation).
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NA".to_string()
    } else {
        format!("{v}")
    }
}

/// A numeric table read from CSV: header names plus row-major values.
#[derive(Debug, Clone)]
pub struct NumericTable {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

/// Reads a headered CSV file in which every field is numeric.
pub fn read_numeric_csv(path: &Path) -> Result<NumericTable> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let columns: Vec<String> = reader
        .headers()?
        .iter()
        .map(|h| h.to_string())
        .collect();
    if columns.is_empty() {
        return Err(Error::invalid("CSV file has an empty header"));
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record?;
        let mut row = Vec::with_capacity(columns.len());
        for (field, name) in record.iter().zip(&columns) {
            let v: f64 = field.parse().map_err(|_| {
                Error::invalid(format!(
                    "row {}: field `{name}` is not numeric: {field:?}",
                    line + 2
                ))
            })?;
            row.push(v);
        }
        if row.len() != columns.len() {
            return Err(Error::invalid(format!(
                "row {}: expected {} fields, got {}",
                line + 2,
                columns.len(),
                row.len()
            )));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::invalid("CSV file contains no data rows"));
    }
    Ok(NumericTable { columns, rows })
}
