use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fit_fold, AucReport, EvalData, FeaturePolicy, ModelSpec, PgmHyper, Hyperparameters, Family};
use crate::error::{Error, Result};
use crate::gnn::GnnConfig;
use crate::graph::EdgeSplit;
use crate::pgm::PgmFitConfig;

/// Community-count (and MTCOV mixing weight) grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmGrid {
    pub k: Vec<usize>,
    #[serde(default = "PgmGrid::default_gamma")]
    pub gamma: Vec<f64>,
}

impl Default for PgmGrid {
    fn default() -> Self {
        Self { k: (2..=10).collect(), gamma: Self::default_gamma() }
    }
}

impl PgmGrid {
    fn default_gamma() -> Vec<f64> {
        vec![0.1, 0.5, 0.9]
    }

    pub fn expand(&self, family: Family, policy: FeaturePolicy, base: &PgmFitConfig) -> Vec<ModelSpec> {
        let gammas: &[f64] = if family == Family::Mtcov { &self.gamma } else { &[0.0] };
        let mut out = Vec::new();
        for &k in &self.k {
            for &gamma in gammas {
                out.push(ModelSpec {
                    family,
                    feature_policy: policy,
                    hyperparameters: Hyperparameters::Pgm(PgmHyper {
                        fit: PgmFitConfig { k, ..base.clone() },
                        gamma,
                    }),
                });
            }
        }
        out
    }
}

/// GNN grid; [`GnnGrid::default`] is the full published grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnGrid {
    pub learning_rate: Vec<f64>,
    pub weight_decay: Vec<f64>,
    pub dropout: Vec<f64>,
    pub hidden_dim: Vec<usize>,
    pub n_layers: Vec<usize>,
}

impl Default for GnnGrid {
    fn default() -> Self {
        Self {
            learning_rate: vec![0.001, 0.01, 0.1],
            weight_decay: vec![0.0001, 0.001, 0.01],
            dropout: vec![0.0, 0.3, 0.5],
            hidden_dim: vec![32, 64, 128],
            n_layers: vec![1, 2],
        }
    }
}

impl GnnGrid {
    /// Configurations in lexicographic grid order.
    pub fn expand(&self, base: &GnnConfig, policy: FeaturePolicy) -> Vec<ModelSpec> {
        let mut out = Vec::new();
        for &learning_rate in &self.learning_rate {
            for &weight_decay in &self.weight_decay {
                for &dropout in &self.dropout {
                    for &hidden_dim in &self.hidden_dim {
                        for &n_layers in &self.n_layers {
                            let cfg = GnnConfig { learning_rate, weight_decay, dropout, hidden_dim, n_layers, ..base.clone() };
                            out.push(ModelSpec::gnn(cfg, policy));
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Candidate {
    pub report: AucReport,
    pub mean_val_auc: f64,
    pub n_parameters: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub best_index: usize,
    pub best: ModelSpec,
    pub report: AucReport,
    pub candidates: Vec<Candidate>,
}

/// Index of the best `(mean validation AUC, parameter count)` pair: highest
/// AUC, then fewest parameters, then earliest. NaN ranks last.
pub fn select_best(scores: &[(f64, usize)]) -> Option<usize> {
    let key = |&(auc, params): &(f64, usize)| (if auc.is_nan() { f64::NEG_INFINITY } else { auc }, params);
    let mut best: Option<usize> = None;
    for (i, s) in scores.iter().enumerate() {
        let (auc, params) = key(s);
        let better = match best {
            None => true,
            Some(b) => {
                let (best_auc, best_params) = key(&scores[b]);
                auc > best_auc || (auc == best_auc && params < best_params)
            }
        };
        if better {
            best = Some(i);
        }
    }
    best
}

/// Evaluates every candidate on every fold and picks the best by mean
/// validation AUC. Test AUCs are reported but never consulted.
pub fn grid_search(candidates: &[ModelSpec], data: &EvalData<'_>, splits: &[EdgeSplit]) -> Result<GridResult> {
    if candidates.is_empty() || splits.is_empty() {
        return Err(Error::InvalidArgument("grid search needs candidates and folds".into()));
    }
    for spec in candidates {
        spec.validate()?;
    }
    let jobs: Vec<(usize, &EdgeSplit)> = (0..candidates.len()).flat_map(|c| splits.iter().map(move |s| (c, s))).collect();
    let results = jobs
        .par_iter()
        .map(|&(c, split)| fit_fold(&candidates[c], data, split).map_err(|e| e.at_fold(split.fold_index)))
        .collect::<Result<Vec<_>>>()?;

    let mut results = results.into_iter();
    let split_seed = splits[0].seed;
    let summaries: Vec<Candidate> = candidates
        .iter()
        .map(|spec| {
            let folds: Vec<_> = results.by_ref().take(splits.len()).collect();
            let report = AucReport::from_folds(spec.clone(), split_seed, folds);
            Candidate {
                mean_val_auc: report.mean_val_auc().unwrap_or(f64::NAN),
                n_parameters: report.folds[0].n_parameters,
                report,
            }
        })
        .collect();
    if candidates.len() > 1 && summaries.iter().all(|c| c.mean_val_auc.is_nan()) {
        return Err(Error::InvalidArgument("grid search needs validation dyads".into()));
    }
    let scores: Vec<(f64, usize)> = summaries.iter().map(|c| (c.mean_val_auc, c.n_parameters)).collect();
    let best_index = select_best(&scores).expect("nonempty grid");
    Ok(GridResult {
        best_index,
        best: candidates[best_index].clone(),
        report: summaries[best_index].report.clone(),
        candidates: summaries,
    })
}
