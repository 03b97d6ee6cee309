//! Node feature matrices: loading, K-means reduction and noise injection.

mod kmeans;
mod perturb;

use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::IdMap;

pub use kmeans::{clustered_feature, kmeans, kmeans_with, KmeansResult};
pub use perturb::{randomize_scalar, shuffle_features, PerturbationManifest};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Structure,
    Attribute,
    Clustered,
}

/// N×F real node features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub values: Array2<f64>,
    pub kind: FeatureKind,
}

impl FeatureMatrix {
    pub fn new(values: Array2<f64>, kind: FeatureKind) -> Self {
        Self { values, kind }
    }

    pub fn n_nodes(&self) -> usize {
        self.values.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.values.ncols()
    }
}

/// Reads a feature CSV.
///
/// A header row is optional. If present and its first cell is `node`, `node_id`
/// or `id`, the first column holds external node ids resolved through `ids`;
/// otherwise rows are taken in node order and must number exactly `ids.len()`.
pub fn load_features(path: impl AsRef<Path>, ids: &IdMap) -> Result<FeatureMatrix> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .from_path(path)?;
    let mut records = reader.records().enumerate().peekable();

    let mut id_column = false;
    if let Some((_, Ok(first))) = records.peek() {
        let is_header = first.iter().any(|c| c.trim().parse::<f64>().is_err());
        if is_header {
            let head = first.get(0).unwrap_or("").trim().to_ascii_lowercase();
            id_column = matches!(head.as_str(), "node" | "node_id" | "id");
            records.next();
        }
    }

    let n = ids.len();
    let mut rows: Vec<Option<Vec<f64>>> = vec![None; n];
    let mut next_row = 0usize;
    let mut n_cols = None;
    for (lineno, rec) in records {
        let rec = rec?;
        let parse_err = |message: String| Error::Parse {
            path: path.to_owned(),
            line: lineno + 1,
            message,
        };
        let mut cells = rec.iter();
        let index = if id_column {
            let id = cells.next().unwrap_or("").trim();
            ids.get(id)
                .ok_or_else(|| parse_err(format!("node id {id:?} not present in the graph")))?
        } else {
            next_row += 1;
            if next_row > n {
                return Err(Error::DimensionMismatch(format!(
                    "{}: more feature rows than the graph's {n} nodes",
                    path.display()
                )));
            }
            next_row - 1
        };
        let values = cells
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| parse_err(format!("non-numeric cell {c:?}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        match n_cols {
            None => n_cols = Some(values.len()),
            Some(c) if c != values.len() => {
                return Err(parse_err(format!("expected {c} values, found {}", values.len())))
            }
            _ => {}
        }
        rows[index] = Some(values);
    }
    let n_cols = n_cols.unwrap_or(0);
    let mut data = Vec::with_capacity(n * n_cols);
    for (i, row) in rows.into_iter().enumerate() {
        let row = row.ok_or_else(|| {
            Error::DimensionMismatch(format!(
                "{}: no feature row for node {:?} ({n} nodes expected)",
                path.display(),
                ids.external(i)
            ))
        })?;
        data.extend(row);
    }
    let values = Array2::from_shape_vec((n, n_cols), data)
        .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
    Ok(FeatureMatrix::new(values, FeatureKind::Attribute))
}
