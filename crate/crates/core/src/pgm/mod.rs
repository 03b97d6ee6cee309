//! Maximum-likelihood mixed-membership SBM inference.
//!
//! The network model is Poisson with rate `M_ij = u_i W v_jᵀ` (the same law
//! the generator samples from). [`mt_fit`] maximizes the likelihood over the
//! training-visible dyads with multiplicative EM updates; [`mtcov_fit`] adds
//! a categorical node attribute emitted from the averaged memberships and
//! mixes the two log-likelihoods with weight `gamma`.
//!
//! Held-out dyads (validation and test, positives and sampled negatives) are
//! removed from every sum rather than treated as zeros.

mod engine;

use std::fs;
use std::path::Path;

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Dyad, EdgeSplit, Graph, NodeLabels};
use crate::matrix_io::{read_matrix_csv, write_matrix_csv};
use crate::synth::{argmax_rows, expected_rate};

pub use engine::FitTrace;
use engine::{AttributeTerm, Observed};

/// Nonnegative memberships `u`, `v` (N×K) and affinity `w` (K×K).
#[derive(Debug, Clone, PartialEq)]
pub struct PgmParams {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub w: Array2<f64>,
}

impl PgmParams {
    pub fn n_communities(&self) -> usize {
        self.w.nrows()
    }

    pub fn is_valid(&self) -> bool {
        self.u
            .iter()
            .chain(self.v.iter())
            .chain(self.w.iter())
            .all(|x| x.is_finite() && *x >= 0.0)
    }

    /// Relabels nodes so that node `i` becomes `perm[i]`.
    pub fn permuted_nodes(&self, perm: &[usize]) -> Self {
        let permute = |m: &Array2<f64>| {
            let mut out = m.clone();
            for (i, &p) in perm.iter().enumerate() {
                out.row_mut(p).assign(&m.row(i));
            }
            out
        };
        Self {
            u: permute(&self.u),
            v: permute(&self.v),
            w: self.w.clone(),
        }
    }
}

/// [`PgmParams`] plus a row-stochastic attribute emission matrix (K×Z).
#[derive(Debug, Clone, PartialEq)]
pub struct MtcovParams {
    pub params: PgmParams,
    pub beta: Array2<f64>,
    pub gamma: f64,
}

fn default_max_iter() -> usize {
    500
}
fn default_rel_tol() -> f64 {
    1e-7
}
fn default_restarts() -> usize {
    5
}
fn default_epsilon() -> f64 {
    1e-12
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmFitConfig {
    pub k: usize,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default = "default_rel_tol")]
    pub rel_tol: f64,
    #[serde(default = "default_restarts")]
    pub n_restarts: usize,
    /// Guard added inside every log and ratio.
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    #[serde(default)]
    pub seed: u64,
}

impl PgmFitConfig {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            max_iter: default_max_iter(),
            rel_tol: default_rel_tol(),
            n_restarts: default_restarts(),
            epsilon: default_epsilon(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 1 {
            return Err(Error::InvalidArgument("K must be >= 1".into()));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::InvalidArgument("rel_tol must be > 0".into()));
        }
        if !(self.epsilon >= 0.0) {
            return Err(Error::InvalidArgument("epsilon must be >= 0".into()));
        }
        Ok(())
    }
}

/// Poisson log-likelihood over the training-visible dyads, without the
/// `log A_ij!` constant:
/// `Σ_train log(M_ij + ε) − Σ_{visible i≠j} M_ij`.
pub fn mt_loglik(g: &Graph, split: &EdgeSplit, params: &PgmParams, epsilon: f64) -> f64 {
    let observed = Observed::new(g, split);
    engine::network_loglik(&observed, params, epsilon)
}

/// Multiplicative EM with random restarts; returns the restart with the best
/// final training log-likelihood.
pub fn mt_fit(g: &Graph, split: &EdgeSplit, cfg: &PgmFitConfig) -> Result<(PgmParams, FitTrace)> {
    cfg.validate()?;
    if g.n_nodes() == 0 {
        return Err(Error::InvalidArgument("cannot fit an empty graph".into()));
    }
    let observed = Observed::new(g, split);
    let (fit, trace) = engine::fit_restarts(&observed, cfg, None)?;
    Ok((fit.params, trace))
}

/// Runs the EM iterations from a given starting point (no restarts).
pub fn mt_fit_from(g: &Graph, split: &EdgeSplit, init: PgmParams, cfg: &PgmFitConfig) -> Result<(PgmParams, FitTrace)> {
    cfg.validate()?;
    let observed = Observed::new(g, split);
    let start = MtcovParams {
        params: init,
        beta: Array2::zeros((0, 0)),
        gamma: 0.0,
    };
    let (fit, trace) = engine::run(&observed, start, None, cfg, 0);
    if !fit.params.is_valid() {
        return Err(Error::Diverged { restarts: 1 });
    }
    Ok((fit.params, trace))
}

/// Fits the network jointly with a categorical attribute `attrs ∈ [0, n_categories)`.
///
/// Maximizes `(1−γ)·L_G + γ·L_X` where `L_G` is [`mt_loglik`] and
/// `L_X = Σ_i log(Σ_k θ_ik β_{k,z_i})`, with `θ_i` the row-normalized average
/// of `u_i` and `v_i`. With `gamma = 0` the `U, V, W` trajectory is exactly
/// that of [`mt_fit`] under the same seed.
pub fn mtcov_fit(
    g: &Graph,
    split: &EdgeSplit,
    attrs: &NodeLabels,
    n_categories: usize,
    gamma: f64,
    cfg: &PgmFitConfig,
) -> Result<(MtcovParams, FitTrace)> {
    cfg.validate()?;
    if !(0.0..=1.0).contains(&gamma) {
        return Err(Error::InvalidArgument(format!("gamma must lie in [0, 1], got {gamma}")));
    }
    if attrs.len() != g.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} attributes for {} nodes",
            attrs.len(),
            g.n_nodes()
        )));
    }
    if let Some(&bad) = attrs.as_slice().iter().find(|&&z| z >= n_categories) {
        return Err(Error::InvalidArgument(format!(
            "attribute {bad} out of range [0, {n_categories})"
        )));
    }
    let observed = Observed::new(g, split);
    let term = AttributeTerm {
        labels: attrs.as_slice(),
        n_categories,
        gamma,
    };
    engine::fit_restarts(&observed, cfg, Some(&term))
}

/// Link score: the Poisson rate `M_ij`.
pub fn mt_score(params: &PgmParams, i: usize, j: usize) -> f64 {
    expected_rate(params.u.view(), params.v.view(), params.w.view(), i, j)
}

pub fn score_dyads(params: &PgmParams, dyads: &[Dyad]) -> Vec<f64> {
    dyads.iter().map(|&(i, j)| mt_score(params, i, j)).collect()
}

/// Hard community per node: argmax of `u_i`, lowest index on ties.
pub fn hard_memberships(params: &PgmParams) -> NodeLabels {
    argmax_rows(params.u.view())
}

/// Metadata written next to fitted parameter matrices.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PgmMetadata {
    pub family: String,
    pub k: usize,
    pub gamma: Option<f64>,
    pub seed: u64,
    pub iterations: usize,
    pub objective: f64,
    pub config: PgmFitConfig,
}

/// Writes `U.csv`, `V.csv`, `W.csv`, optionally `Beta.csv`, and `params.json`.
pub fn write_params(
    dir: impl AsRef<Path>,
    params: &PgmParams,
    beta: Option<&Array2<f64>>,
    meta: &PgmMetadata,
) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_matrix_csv(dir.join("U.csv"), params.u.view())?;
    write_matrix_csv(dir.join("V.csv"), params.v.view())?;
    write_matrix_csv(dir.join("W.csv"), params.w.view())?;
    if let Some(beta) = beta {
        write_matrix_csv(dir.join("Beta.csv"), beta.view())?;
    }
    let path = dir.join("params.json");
    fs::write(&path, serde_json::to_string_pretty(meta)?).map_err(|e| Error::io(&path, e))
}

pub fn read_params(dir: impl AsRef<Path>) -> Result<(PgmParams, PgmMetadata)> {
    let dir = dir.as_ref();
    let path = dir.join("params.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let meta = serde_json::from_str(&text)?;
    let params = PgmParams {
        u: read_matrix_csv(dir.join("U.csv"))?,
        v: read_matrix_csv(dir.join("V.csv"))?,
        w: read_matrix_csv(dir.join("W.csv"))?,
    };
    Ok((params, meta))
}
