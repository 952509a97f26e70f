//! CSV input: one observation per row, comma-delimited, optional header.

use std::io::Read;
use std::path::Path;

use ndarray::Array2;

use crate::error::{dim_err, Error, Result};

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path.as_ref())?;
    read_matrix_csv_from(file)
}

/// Parses numeric rows. A first row that does not parse as numbers is taken
/// to be a header and skipped.
pub fn read_matrix_csv_from<R: Read>(reader: R) -> Result<Array2<f64>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut width = None;
    let mut rows = 0usize;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        if rec.iter().all(str::is_empty) {
            continue;
        }
        let parsed: std::result::Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        let values = match parsed {
            Ok(v) => v,
            Err(_) if idx == 0 => continue,
            Err(e) => {
                return Err(Error::InvalidInput(format!("line {}: {e}", idx + 1)));
            }
        };
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(dim_err(format!("{w} columns"), format!("{} on line {}", values.len(), idx + 1)));
            }
            _ => {}
        }
        data.extend(values);
        rows += 1;
    }
    let d = width.unwrap_or(0);
    if rows == 0 || d == 0 {
        return Err(Error::InvalidInput("CSV contains no numeric rows".into()));
    }
    Array2::from_shape_vec((rows, d), data).map_err(|e| Error::InvalidInput(e.to_string()))
}
