//! Plain numeric CSV for dense matrices: no header, one row per line.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

pub fn write_matrix_csv(path: impl AsRef<Path>, m: ArrayView2<'_, f64>) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    for row in m.rows() {
        w.write_record(row.iter().map(|v| format!("{v:?}")))?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    let path = path.as_ref();
    let mut r = csv::ReaderBuilder::new()
        .has_headers(false)
        .from_path(path)?;
    let mut data = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for (lineno, rec) in r.records().enumerate() {
        let rec = rec?;
        match n_cols {
            None => n_cols = Some(rec.len()),
            Some(c) if c != rec.len() => {
                return Err(Error::Parse {
                    path: path.to_owned(),
                    line: lineno + 1,
                    message: format!("expected {c} columns, found {}", rec.len()),
                })
            }
            _ => {}
        }
        for cell in rec.iter() {
            let v: f64 = cell.trim().parse().map_err(|_| Error::Parse {
                path: path.to_owned(),
                line: lineno + 1,
                message: format!("non-numeric cell {cell:?}"),
            })?;
            data.push(v);
        }
        n_rows += 1;
    }
    Array2::from_shape_vec((n_rows, n_cols.unwrap_or(0)), data)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))
}
