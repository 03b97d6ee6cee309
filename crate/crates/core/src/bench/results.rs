use std::fs::{self, File};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{AucReport, ModelSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Status {
    Ok,
    Failed,
}

/// One measurement in the long-format results table. Together with the
/// dataset's seeds, the family, feature policy, hyperparameters and fold
/// seed are enough to rerun the fit bit-identically.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub experiment: String,
    pub dataset: String,
    pub replicate: usize,
    pub data_seed: Option<u64>,
    pub split_seed: u64,
    pub model: String,
    pub feature_policy: String,
    pub hyperparameters: String,
    /// Fold index, or `all` for aggregates.
    pub fold: String,
    pub fold_seed: Option<u64>,
    pub rho: Option<f64>,
    pub homophily: Option<f64>,
    pub metric: String,
    pub value: f64,
    pub status: Status,
    pub message: String,
}

/// Fields shared by every row of one (experiment, dataset, replicate).
#[derive(Debug, Clone, Default)]
pub struct RowContext {
    pub experiment: String,
    pub dataset: String,
    pub replicate: usize,
    pub data_seed: Option<u64>,
    pub split_seed: u64,
    pub rho: Option<f64>,
    pub homophily: Option<f64>,
}

impl RowContext {
    pub fn row(&self, spec: &ModelSpec, fold: String, fold_seed: Option<u64>, metric: &str, value: f64) -> ResultRow {
        ResultRow {
            experiment: self.experiment.clone(),
            dataset: self.dataset.clone(),
            replicate: self.replicate,
            data_seed: self.data_seed,
            split_seed: self.split_seed,
            model: spec.family.name().into(),
            feature_policy: spec.feature_policy.name().into(),
            hyperparameters: spec.hyperparameters_json(),
            fold,
            fold_seed,
            rho: self.rho,
            homophily: self.homophily,
            metric: metric.into(),
            value,
            status: Status::Ok,
            message: String::new(),
        }
    }

    /// Per-fold `test_auc` (and `val_auc` when present) plus aggregate
    /// `test_auc_mean` / `test_auc_std` rows.
    pub fn report_rows(&self, report: &AucReport) -> Vec<ResultRow> {
        let spec = &report.spec;
        let mut rows = Vec::new();
        for f in &report.folds {
            rows.push(self.row(spec, f.fold.to_string(), Some(f.seed), "test_auc", f.test_auc));
        }
        rows.push(self.row(spec, "all".into(), None, "test_auc_mean", report.mean));
        rows.push(self.row(spec, "all".into(), None, "test_auc_std", report.std));
        rows
    }

    /// Marker row for a fit that errored.
    pub fn failed_row(&self, spec: &ModelSpec, err: &Error) -> ResultRow {
        let fold = match err {
            Error::Fold { fold, .. } => fold.to_string(),
            _ => "all".into(),
        };
        ResultRow {
            status: Status::Failed,
            message: err.to_string(),
            ..self.row(spec, fold, None, "test_auc", f64::NAN)
        }
    }
}

/// Serializes rows as they arrive so partial results survive a failure.
pub struct ResultWriter {
    writer: csv::Writer<File>,
    rows: Vec<ResultRow>,
}

impl ResultWriter {
    pub fn create(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        Ok(Self { writer: csv::Writer::from_path(path)?, rows: Vec::new() })
    }

    pub fn push(&mut self, row: ResultRow) -> Result<()> {
        self.writer.serialize(&row)?;
        self.writer.flush().map_err(|e| Error::io("results.csv", e))?;
        self.rows.push(row);
        Ok(())
    }

    pub fn extend(&mut self, rows: impl IntoIterator<Item = ResultRow>) -> Result<()> {
        rows.into_iter().try_for_each(|r| self.push(r))
    }

    pub fn rows(&self) -> &[ResultRow] {
        &self.rows
    }

    pub fn n_failed(&self) -> usize {
        self.rows.iter().filter(|r| r.status == Status::Failed).count()
    }
}

pub fn read_results(path: impl AsRef<Path>) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path.as_ref())?;
    Ok(reader.deserialize().collect::<std::result::Result<Vec<ResultRow>, _>>()?)
}

pub fn write_json(path: impl AsRef<Path>, value: &impl Serialize) -> Result<()> {
    let path = path.as_ref();
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, serde_json::to_string_pretty(value)? + "\n").map_err(|e| Error::io(path, e))
}
