use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{Family, FeaturePolicy, GnnGrid, PgmGrid};
use crate::synth::{Structure, SynthConfig};

/// Where a dataset comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum DatasetSpec {
    /// Generated per replicate; the config's own seed is replaced by a
    /// replicate seed derived from the experiment seed.
    Synthetic(SynthConfig),
    Files {
        #[serde(default)]
        name: Option<String>,
        edges: PathBuf,
        #[serde(default)]
        directed: bool,
        #[serde(default)]
        labels: Option<PathBuf>,
        #[serde(default)]
        features: Option<PathBuf>,
        /// `node value` lines with a categorical attribute for MTCOV.
        #[serde(default)]
        attribute: Option<PathBuf>,
    },
    /// `<dir>/<name>.content` and `<dir>/<name>.cites` (Cora/Citeseer layout).
    Planetoid { dir: PathBuf, name: String },
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec::Synthetic(SynthConfig::new(100, 5, 20.0, Structure::Assortative, 0))
    }
}

/// Node features attached to synthetic networks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SyntheticFeatures {
    None,
    /// The ground-truth membership matrix `U` (informative by construction).
    #[default]
    Membership,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelArm {
    pub family: Family,
    pub feature_policy: FeaturePolicy,
}

impl ModelArm {
    pub fn new(family: Family, feature_policy: FeaturePolicy) -> Self {
        Self { family, feature_policy }
    }

    pub fn label(&self) -> String {
        format!("{}:{}", self.family.name(), self.feature_policy.name())
    }
}

/// `family:policy`, e.g. `gae:structure`; a bare `mt` means `mt:none`.
impl std::str::FromStr for ModelArm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let (family, policy) = match s.split_once(':') {
            Some((f, p)) => (f.parse()?, p.parse()?),
            None => {
                let family: Family = s.parse()?;
                if family != Family::Mt {
                    return Err(Error::InvalidArgument(format!("{s:?} needs a feature policy, e.g. {s}:structure")));
                }
                (family, FeaturePolicy::None)
            }
        };
        Ok(Self::new(family, policy))
    }
}

fn default_replicates() -> usize {
    1
}
fn default_folds() -> usize {
    5
}
fn default_val_fraction() -> f64 {
    0.1
}
fn default_output() -> PathBuf {
    PathBuf::from("results")
}
fn default_rho() -> Vec<f64> {
    vec![0.0, 0.5, 1.0]
}

/// Fit settings shared by every PGM candidate (K and gamma come from the grid).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmSettings {
    pub max_iter: usize,
    pub rel_tol: f64,
    pub n_restarts: usize,
    pub epsilon: f64,
}

impl Default for PgmSettings {
    fn default() -> Self {
        let d = crate::pgm::PgmFitConfig::new(1, 0);
        Self { max_iter: d.max_iter, rel_tol: d.rel_tol, n_restarts: d.n_restarts, epsilon: d.epsilon }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GnnSettings {
    pub epochs: usize,
    pub patience: usize,
    pub resample_negatives: bool,
}

impl Default for GnnSettings {
    fn default() -> Self {
        Self { epochs: 200, patience: 50, resample_negatives: false }
    }
}

/// One JSON document drives every subcommand. Missing fields take the
/// defaults below, and the fully resolved config is echoed into each
/// output manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub replicates: usize,
    pub n_folds: usize,
    pub val_fraction: f64,
    /// Worker threads; 0 means one per core.
    pub jobs: usize,
    pub output_dir: PathBuf,
    pub dataset: DatasetSpec,
    pub synthetic_features: SyntheticFeatures,
    /// Arms for `evaluate`; the experiments use their own arm lists when
    /// this is empty.
    pub models: Vec<ModelArm>,
    pub pgm_grid: PgmGrid,
    pub gnn_grid: GnnGrid,
    pub pgm: PgmSettings,
    pub gnn: GnnSettings,
    /// Noise levels; 0 is always evaluated as the reference.
    pub rho: Vec<f64>,
    /// Datasets for the heterophily experiment; empty means the configured
    /// synthetic dataset in its assortative and disassortative forms.
    pub heterophily_datasets: Vec<DatasetSpec>,
    /// K-means clusters for the clustered policy; defaults to the number of
    /// label classes (synthetic: K).
    pub n_clusters: Option<usize>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            replicates: default_replicates(),
            n_folds: default_folds(),
            val_fraction: default_val_fraction(),
            jobs: 0,
            output_dir: default_output(),
            dataset: DatasetSpec::default(),
            synthetic_features: SyntheticFeatures::default(),
            models: Vec::new(),
            pgm_grid: PgmGrid::default(),
            gnn_grid: GnnGrid::default(),
            pgm: PgmSettings::default(),
            gnn: GnnSettings::default(),
            rho: default_rho(),
            heterophily_datasets: Vec::new(),
            n_clusters: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(m.into()));
        if self.replicates < 1 {
            return bad("replicates must be >= 1");
        }
        if self.pgm_grid.k.is_empty() || self.pgm_grid.gamma.is_empty() {
            return bad("pgm_grid needs at least one K and one gamma");
        }
        let g = &self.gnn_grid;
        if g.learning_rate.is_empty() || g.weight_decay.is_empty() || g.dropout.is_empty() || g.hidden_dim.is_empty() || g.n_layers.is_empty() {
            return bad("every gnn_grid axis needs at least one value");
        }
        if self.rho.iter().any(|r| !(0.0..=1.0).contains(r)) {
            return bad("rho values must lie in [0, 1]");
        }
        if let DatasetSpec::Synthetic(s) = &self.dataset {
            s.validate()?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config is serializable")
    }
}
