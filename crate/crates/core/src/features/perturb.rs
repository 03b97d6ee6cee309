use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{Error, Result};
use crate::graph::NodeLabels;
use crate::rng::rng_from_seed;

/// Which nodes were perturbed, for exact replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerturbationManifest {
    pub rho: f64,
    pub seed: u64,
    pub selected: Vec<usize>,
}

fn check_rho(rho: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(Error::InvalidArgument(format!("rho must lie in [0, 1], got {rho}")));
    }
    Ok(())
}

fn n_selected(rho: f64, n: usize) -> usize {
    // guard against 0.3 * 10 = 3.0000000000000004
    ((rho * n as f64 - 1e-9).ceil().max(0.0) as usize).min(n)
}

/// Permutes the entries of `⌈rho·N⌉` uniformly chosen rows, each with its
/// own permutation. Other rows are untouched.
pub fn shuffle_features(x: &FeatureMatrix, rho: f64, seed: u64) -> Result<(FeatureMatrix, PerturbationManifest)> {
    check_rho(rho)?;
    let n = x.n_nodes();
    let mut rng = rng_from_seed(seed);
    let mut selected = sample(&mut rng, n, n_selected(rho, n)).into_vec();
    selected.sort_unstable();
    let mut out = x.clone();
    let mut buf = Vec::with_capacity(x.n_features());
    for &i in &selected {
        buf.clear();
        buf.extend(out.values.row(i).iter().copied());
        buf.shuffle(&mut rng);
        for (dst, v) in out.values.row_mut(i).iter_mut().zip(&buf) {
            *dst = *v;
        }
    }
    Ok((out, PerturbationManifest { rho, seed, selected }))
}

/// Replaces the label of `⌈rho·N⌉` uniformly chosen nodes by a uniform
/// draw from `[0, n_categories)`; the draw may equal the original.
pub fn randomize_scalar(
    labels: &NodeLabels,
    rho: f64,
    n_categories: usize,
    seed: u64,
) -> Result<(NodeLabels, PerturbationManifest)> {
    check_rho(rho)?;
    if n_categories == 0 || labels.as_slice().iter().any(|&l| l >= n_categories) {
        return Err(Error::InvalidArgument(format!(
            "labels must lie in [0, {n_categories})"
        )));
    }
    let n = labels.len();
    let mut rng = rng_from_seed(seed);
    let mut selected = sample(&mut rng, n, n_selected(rho, n)).into_vec();
    selected.sort_unstable();
    let mut out = labels.clone();
    for &i in &selected {
        out.0[i] = rng.random_range(0..n_categories);
    }
    Ok((out, PerturbationManifest { rho, seed, selected }))
}
