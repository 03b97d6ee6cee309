//! Cross-validated link-prediction evaluation and hyperparameter search.
//!
//! Every model family is reduced to a per-fold scorer over dyads; AUC is
//! computed on the fold's validation dyads (for selection) and its test
//! dyads (for reporting) from the same fit.

mod auc;
mod grid;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{clustered_feature, FeatureMatrix};
use crate::gnn::{self, GnnConfig, PhaseFeatures};
use crate::graph::{masked_adjacency, Dyad, EdgeSplit, Graph, NodeLabels, Phase};
use crate::pgm::{self, PgmFitConfig, PgmParams};
use crate::rng::derive_seed;

pub use auc::auc;
pub use grid::{grid_search, select_best, Candidate, GnnGrid, GridResult, PgmGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Mt,
    Mtcov,
    Gae,
    Vgae,
}

impl Family {
    pub fn is_gnn(self) -> bool {
        matches!(self, Family::Gae | Family::Vgae)
    }

    pub fn name(self) -> &'static str {
        match self {
            Family::Mt => "mt",
            Family::Mtcov => "mtcov",
            Family::Gae => "gae",
            Family::Vgae => "vgae",
        }
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mt" | "multitensor" => Ok(Family::Mt),
            "mtcov" => Ok(Family::Mtcov),
            "gae" => Ok(Family::Gae),
            "vgae" => Ok(Family::Vgae),
            other => Err(Error::InvalidArgument(format!("unknown model family {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeaturePolicy {
    None,
    Structure,
    Attribute,
    Clustered,
}

impl FeaturePolicy {
    pub fn name(self) -> &'static str {
        match self {
            FeaturePolicy::None => "none",
            FeaturePolicy::Structure => "structure",
            FeaturePolicy::Attribute => "attribute",
            FeaturePolicy::Clustered => "clustered",
        }
    }
}

impl std::str::FromStr for FeaturePolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Ok(FeaturePolicy::None),
            "structure" => Ok(FeaturePolicy::Structure),
            "attribute" => Ok(FeaturePolicy::Attribute),
            "clustered" => Ok(FeaturePolicy::Clustered),
            other => Err(Error::InvalidArgument(format!("unknown feature policy {other:?}"))),
        }
    }
}

/// PGM hyperparameters; `gamma` is used by MTCOV only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmHyper {
    #[serde(flatten)]
    pub fit: PgmFitConfig,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Hyperparameters {
    Pgm(PgmHyper),
    Gnn(GnnConfig),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub family: Family,
    pub feature_policy: FeaturePolicy,
    pub hyperparameters: Hyperparameters,
}

impl ModelSpec {
    pub fn mt(k: usize, seed: u64) -> Self {
        Self {
            family: Family::Mt,
            feature_policy: FeaturePolicy::None,
            hyperparameters: Hyperparameters::Pgm(PgmHyper { fit: PgmFitConfig::new(k, seed), gamma: 0.0 }),
        }
    }

    pub fn mtcov(k: usize, gamma: f64, policy: FeaturePolicy, seed: u64) -> Self {
        Self {
            family: Family::Mtcov,
            feature_policy: policy,
            hyperparameters: Hyperparameters::Pgm(PgmHyper { fit: PgmFitConfig::new(k, seed), gamma }),
        }
    }

    /// GAE or VGAE depending on `cfg.variational`.
    pub fn gnn(cfg: GnnConfig, policy: FeaturePolicy) -> Self {
        Self {
            family: if cfg.variational { Family::Vgae } else { Family::Gae },
            feature_policy: policy,
            hyperparameters: Hyperparameters::Gnn(cfg),
        }
    }

    pub fn seed(&self) -> u64 {
        match &self.hyperparameters {
            Hyperparameters::Pgm(h) => h.fit.seed,
            Hyperparameters::Gnn(c) => c.seed,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        match &mut self.hyperparameters {
            Hyperparameters::Pgm(h) => h.fit.seed = seed,
            Hyperparameters::Gnn(c) => c.seed = seed,
        }
        self
    }

    /// Hyperparameters as compact JSON, for result rows.
    pub fn hyperparameters_json(&self) -> String {
        serde_json::to_string(&self.hyperparameters).unwrap_or_default()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        match (&self.hyperparameters, self.family) {
            (Hyperparameters::Pgm(h), Family::Mt | Family::Mtcov) => h.fit.validate()?,
            (Hyperparameters::Gnn(c), Family::Gae | Family::Vgae) => {
                c.validate()?;
                if c.variational != (self.family == Family::Vgae) {
                    return bad("variational flag disagrees with the model family".into());
                }
            }
            _ => return bad(format!("hyperparameters do not match family {}", self.family.name())),
        }
        match (self.family, self.feature_policy) {
            (Family::Mt, FeaturePolicy::None) => Ok(()),
            (Family::Mt, p) => bad(format!("mt takes no features (policy {})", p.name())),
            (_, FeaturePolicy::None) => bad(format!("{} needs a feature policy", self.family.name())),
            (Family::Mtcov, FeaturePolicy::Structure) => {
                bad("mtcov needs a scalar attribute (attribute or clustered policy)".into())
            }
            _ => Ok(()),
        }
    }
}

/// A dataset as seen by the evaluator.
#[derive(Debug, Clone, Copy)]
pub struct EvalData<'a> {
    pub graph: &'a Graph,
    /// Attribute features (for the attribute and clustered policies).
    pub features: Option<&'a FeatureMatrix>,
    /// Categorical node attribute for MTCOV under the attribute policy.
    pub scalar_attribute: Option<&'a NodeLabels>,
    /// Number of K-means clusters for the clustered policy.
    pub n_clusters: usize,
}

impl<'a> EvalData<'a> {
    pub fn structure_only(graph: &'a Graph, n_clusters: usize) -> Self {
        Self { graph, features: None, scalar_attribute: None, n_clusters }
    }
}

/// Validation and test AUC of one fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub seed: u64,
    pub val_auc: Option<f64>,
    pub test_auc: f64,
    pub n_parameters: usize,
}

/// Scores a fold's validation and test dyads with per-phase scorers.
pub fn score_fold(
    split: &EdgeSplit,
    mut scorer: impl FnMut(Phase, &[Dyad]) -> Vec<f64>,
) -> Result<(Option<f64>, f64)> {
    let val = if split.val_pos.is_empty() || split.val_neg.is_empty() {
        None
    } else {
        Some(auc(&scorer(Phase::Val, &split.val_pos), &scorer(Phase::Val, &split.val_neg))?)
    };
    let test = auc(&scorer(Phase::Test, &split.test_pos), &scorer(Phase::Test, &split.test_neg))?;
    Ok((val, test))
}

/// Per-fold clustered scalar feature: K-means of the attribute matrix when
/// present, else of the train-masked adjacency rows.
pub fn clustered_column(data: &EvalData<'_>, split: &EdgeSplit, seed: u64) -> FeatureMatrix {
    match data.features {
        Some(x) => clustered_feature(x, data.n_clusters, seed),
        None => clustered_feature(&masked_adjacency(data.graph, split, Phase::Train), data.n_clusters, seed),
    }
}

fn column_to_labels(x: &FeatureMatrix) -> NodeLabels {
    NodeLabels(x.values.column(0).iter().map(|&v| v as usize).collect())
}

/// Seed of the fit of `spec` on `split`.
pub fn fold_seed(spec: &ModelSpec, split: &EdgeSplit) -> u64 {
    derive_seed(spec.seed(), split.fold_index as u64)
}

/// Categorical attribute MTCOV sees under `policy`.
pub fn mtcov_attribute(policy: FeaturePolicy, data: &EvalData<'_>, split: &EdgeSplit, seed: u64) -> Result<NodeLabels> {
    match policy {
        FeaturePolicy::Attribute => data
            .scalar_attribute
            .cloned()
            .ok_or_else(|| Error::InvalidArgument("mtcov needs a scalar attribute".into())),
        _ => Ok(column_to_labels(&clustered_column(data, split, seed))),
    }
}

/// GNN input features under `policy`.
pub fn gnn_features(policy: FeaturePolicy, data: &EvalData<'_>, split: &EdgeSplit, seed: u64) -> Result<PhaseFeatures> {
    Ok(match policy {
        FeaturePolicy::Structure => PhaseFeatures::structure(data.graph, split),
        FeaturePolicy::Attribute => PhaseFeatures::fixed(
            data.features
                .ok_or_else(|| Error::InvalidArgument("attribute policy needs node features".into()))?,
        ),
        FeaturePolicy::Clustered => PhaseFeatures::fixed(&clustered_column(data, split, seed)),
        FeaturePolicy::None => PhaseFeatures::identity(data.graph.n_nodes()),
    })
}

fn pgm_scores(params: &PgmParams) -> impl FnMut(Phase, &[Dyad]) -> Vec<f64> + '_ {
    move |_, dyads| pgm::score_dyads(params, dyads)
}

/// Fits `spec` on one fold and returns its validation and test AUC.
pub fn fit_fold(spec: &ModelSpec, data: &EvalData<'_>, split: &EdgeSplit) -> Result<FoldResult> {
    spec.validate()?;
    let g = data.graph;
    let seed = fold_seed(spec, split);
    let n = g.n_nodes();
    let (val_auc, test_auc, n_parameters) = match &spec.hyperparameters {
        Hyperparameters::Pgm(h) => {
            let cfg = PgmFitConfig { seed, ..h.fit.clone() };
            let k = cfg.k;
            if spec.family == Family::Mt {
                let (params, _) = pgm::mt_fit(g, split, &cfg)?;
                let (v, t) = score_fold(split, pgm_scores(&params))?;
                (v, t, 2 * n * k + k * k)
            } else {
                let labels = mtcov_attribute(spec.feature_policy, data, split, seed)?;
                let z = labels.n_classes();
                let (fit, _) = pgm::mtcov_fit(g, split, &labels, z, h.gamma, &cfg)?;
                let (v, t) = score_fold(split, pgm_scores(&fit.params))?;
                (v, t, 2 * n * k + k * k + k * z)
            }
        }
        Hyperparameters::Gnn(c) => {
            let cfg = GnnConfig { seed, ..c.clone() };
            let feats = gnn_features(spec.feature_policy, data, split, seed)?;
            let (model, _) = gnn::train(g, split, &feats, &cfg)?;
            let (v, t) = score_fold(split, |phase, dyads| {
                gnn::score_dyads(&gnn::embed(&model, g, split, &feats, phase), dyads)
            })?;
            (v, t, model.n_parameters())
        }
    };
    Ok(FoldResult { fold: split.fold_index, seed, val_auc, test_auc, n_parameters })
}

/// Mean and population standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AucReport {
    pub spec: ModelSpec,
    pub split_seed: u64,
    pub folds: Vec<FoldResult>,
    pub per_fold: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

impl AucReport {
    pub fn from_folds(spec: ModelSpec, split_seed: u64, folds: Vec<FoldResult>) -> Self {
        let per_fold: Vec<f64> = folds.iter().map(|f| f.test_auc).collect();
        let (mean, std) = mean_std(&per_fold);
        Self { spec, split_seed, folds, per_fold, mean, std }
    }

    /// Mean validation AUC; `None` if any fold lacks validation dyads.
    pub fn mean_val_auc(&self) -> Option<f64> {
        let vals: Option<Vec<f64>> = self.folds.iter().map(|f| f.val_auc).collect();
        vals.map(|v| mean_std(&v).0)
    }
}

/// Runs `f` on a pool of `jobs` threads (0 = one per core).
pub fn with_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

/// Cross-validated test AUC of one model specification.
pub fn evaluate(spec: &ModelSpec, data: &EvalData<'_>, splits: &[EdgeSplit]) -> Result<AucReport> {
    spec.validate()?;
    let folds = splits
        .par_iter()
        .map(|split| fit_fold(spec, data, split).map_err(|e| e.at_fold(split.fold_index)))
        .collect::<Result<Vec<_>>>()?;
    let split_seed = splits.first().map_or(0, |s| s.seed);
    Ok(AucReport::from_folds(spec.clone(), split_seed, folds))
}
