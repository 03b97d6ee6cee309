use std::collections::HashSet;

use ndarray::Array2;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Dyad, Graph};
use crate::error::{Error, Result};
use crate::features::{FeatureKind, FeatureMatrix};
use crate::rng::{derive_seed, rng_from_seed};

/// Which dyads are visible as observed structure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Train,
    Val,
    Test,
}

/// One cross-validation fold.
///
/// Dyads are canonical: undirected graphs list each pair once with `i < j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSplit {
    pub fold_index: usize,
    pub seed: u64,
    pub train_pos: Vec<Dyad>,
    pub val_pos: Vec<Dyad>,
    pub test_pos: Vec<Dyad>,
    pub train_neg: Vec<Dyad>,
    pub val_neg: Vec<Dyad>,
    pub test_neg: Vec<Dyad>,
}

impl EdgeSplit {
    /// Positive dyads visible as structure in the given phase.
    pub fn visible_positives(&self, phase: Phase) -> impl Iterator<Item = Dyad> + '_ {
        let val: &[Dyad] = if phase == Phase::Train { &[] } else { &self.val_pos };
        let test: &[Dyad] = if phase == Phase::Test { &self.test_pos } else { &[] };
        self.train_pos.iter().chain(val).chain(test).copied()
    }

    /// Validation and test dyads, positive and negative.
    pub fn held_out(&self) -> impl Iterator<Item = Dyad> + '_ {
        self.val_pos
            .iter()
            .chain(&self.test_pos)
            .chain(&self.val_neg)
            .chain(&self.test_neg)
            .copied()
    }
}

/// Expands canonical dyads into ordered dyads (both orientations if undirected).
pub(crate) fn orient(dyads: impl Iterator<Item = Dyad>, directed: bool) -> Vec<Dyad> {
    let mut out = Vec::new();
    for (i, j) in dyads {
        out.push((i, j));
        if !directed {
            out.push((j, i));
        }
    }
    out
}

/// JSON-exportable record of a full split for exact reruns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub n_nodes: usize,
    pub directed: bool,
    pub n_folds: usize,
    pub val_fraction: f64,
    pub seed: u64,
    pub folds: Vec<EdgeSplit>,
}

/// Shuffles edges into `n_folds` test blocks. For each fold, `val_fraction`
/// of all edges is drawn from the non-test remainder as validation and the
/// rest is training. Each positive list gets an equally sized list of
/// non-edge negatives; negatives are disjoint across phases within a fold.
pub fn split_edges(g: &Graph, n_folds: usize, val_fraction: f64, seed: u64) -> Result<Vec<EdgeSplit>> {
    if n_folds < 2 {
        return Err(Error::InvalidArgument(format!("n_folds must be >= 2, got {n_folds}")));
    }
    if !(0.0..0.8).contains(&val_fraction) {
        return Err(Error::InvalidArgument(format!(
            "val_fraction must lie in [0, 0.8), got {val_fraction}"
        )));
    }
    let mut edges = g.canonical_edges();
    let n_edges = edges.len();
    if n_edges < n_folds {
        return Err(Error::InvalidArgument(format!(
            "{n_edges} edges cannot fill {n_folds} folds"
        )));
    }
    let available = g.n_candidate_dyads() - n_edges;
    if available < n_edges {
        return Err(Error::InsufficientNonEdges {
            needed: n_edges,
            available,
        });
    }

    let mut rng = rng_from_seed(seed);
    edges.shuffle(&mut rng);
    let n_val = ((val_fraction * n_edges as f64).round() as usize).min(n_edges - n_edges / n_folds - 1);

    let mut splits = Vec::with_capacity(n_folds);
    for fold in 0..n_folds {
        let start = fold * n_edges / n_folds;
        let end = (fold + 1) * n_edges / n_folds;
        let test_pos = edges[start..end].to_vec();
        let mut rest: Vec<Dyad> = edges[..start].iter().chain(&edges[end..]).copied().collect();

        let mut fold_rng = rng_from_seed(derive_seed(seed, fold as u64 + 1));
        rest.shuffle(&mut fold_rng);
        let val_pos = rest[..n_val].to_vec();
        let train_pos = rest[n_val..].to_vec();

        let mut negatives = sample_non_edges(g, n_edges, &mut fold_rng);
        let train_neg = negatives.split_off(test_pos.len() + val_pos.len());
        let val_neg = negatives.split_off(test_pos.len());
        let test_neg = negatives;

        splits.push(EdgeSplit {
            fold_index: fold,
            seed,
            train_pos,
            val_pos,
            test_pos,
            train_neg,
            val_neg,
            test_neg,
        });
    }
    Ok(splits)
}

/// Uniform non-edge dyads without replacement. Rejection sampling with a cap
/// of `100 * needed` draws, then exhaustive enumeration for dense graphs.
fn sample_non_edges<R: Rng>(g: &Graph, needed: usize, rng: &mut R) -> Vec<Dyad> {
    let n = g.n_nodes();
    let canonical = |i: usize, j: usize| if g.is_directed() || i < j { (i, j) } else { (j, i) };
    let mut chosen = HashSet::with_capacity(needed);
    let mut out = Vec::with_capacity(needed);
    let cap = needed.saturating_mul(100);
    let mut attempts = 0usize;
    while out.len() < needed && attempts < cap {
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j || g.has_edge(i, j) {
            continue;
        }
        let d = canonical(i, j);
        if chosen.insert(d) {
            out.push(d);
        }
    }
    if out.len() < needed {
        let mut pool: Vec<Dyad> = (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && (g.is_directed() || i < j) && !g.has_edge(i, j))
            .filter(|d| !chosen.contains(d))
            .collect();
        pool.shuffle(rng);
        out.extend(pool.into_iter().take(needed - out.len()));
    }
    out
}

/// N×N structure features: the adjacency rows restricted to what is visible
/// in `phase` (train ⊆ train+val ⊆ all edges).
pub fn masked_adjacency(g: &Graph, split: &EdgeSplit, phase: Phase) -> FeatureMatrix {
    let n = g.n_nodes();
    let mut a = Array2::<f64>::zeros((n, n));
    for (i, j) in split.visible_positives(phase) {
        a[[i, j]] = 1.0;
        if !g.is_directed() {
            a[[j, i]] = 1.0;
        }
    }
    FeatureMatrix::new(a, FeatureKind::Structure)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_graph(n: usize, m: usize, seed: u64, directed: bool) -> Graph {
        let mut rng = rng_from_seed(seed);
        let mut dyads = HashSet::new();
        while dyads.len() < m {
            let i = rng.random_range(0..n);
            let j = rng.random_range(0..n);
            if i != j {
                dyads.insert(if directed || i < j { (i, j) } else { (j, i) });
            }
        }
        Graph::new(n, directed, dyads).unwrap()
    }

    #[test]
    fn fold_sizes_follow_fractions() {
        let g = random_graph(100, 400, 1, true);
        let splits = split_edges(&g, 5, 0.1, 42).unwrap();
        assert_eq!(splits.len(), 5);
        for s in &splits {
            assert_eq!(s.test_pos.len(), 80);
            assert_eq!(s.val_pos.len(), 40);
            assert_eq!(s.train_pos.len(), 280);
            assert_eq!(s.test_neg.len(), 80);
            assert_eq!(s.val_neg.len(), 40);
            assert_eq!(s.train_neg.len(), 280);
        }
    }

    #[test]
    fn same_seed_same_splits() {
        let g = random_graph(60, 200, 2, true);
        assert_eq!(split_edges(&g, 5, 0.1, 9).unwrap(), split_edges(&g, 5, 0.1, 9).unwrap());
        assert_ne!(split_edges(&g, 5, 0.1, 9).unwrap(), split_edges(&g, 5, 0.1, 10).unwrap());
    }

    #[test]
    fn test_blocks_cover_edge_set() {
        let g = random_graph(50, 173, 3, false);
        let splits = split_edges(&g, 5, 0.1, 4).unwrap();
        let mut union: Vec<Dyad> = splits.iter().flat_map(|s| s.test_pos.clone()).collect();
        union.sort_unstable();
        assert_eq!(union, g.canonical_edges());
    }

    #[test]
    fn dense_graph_fails_with_count() {
        // complete directed graph on 4 nodes: no non-edges at all
        let all = (0..4).flat_map(|i| (0..4).map(move |j| (i, j))).filter(|(i, j)| i != j);
        let g = Graph::new(4, true, all).unwrap();
        match split_edges(&g, 2, 0.1, 0) {
            Err(Error::InsufficientNonEdges { needed, available }) => {
                assert_eq!((needed, available), (12, 0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_arguments() {
        let g = random_graph(20, 30, 5, true);
        assert!(split_edges(&g, 1, 0.1, 0).is_err());
        assert!(split_edges(&g, 5, 0.8, 0).is_err());
        assert!(split_edges(&random_graph(20, 3, 5, true), 5, 0.1, 0).is_err());
    }

    #[test]
    fn near_dense_graph_uses_enumeration_fallback() {
        // 90 of 110 dyads are edges: fewer than 90 non-edges exist
        let g = random_graph(11, 55, 6, true);
        let splits = split_edges(&g, 5, 0.1, 1).unwrap();
        for s in &splits {
            let negs: HashSet<Dyad> =
                s.train_neg.iter().chain(&s.val_neg).chain(&s.test_neg).copied().collect();
            assert_eq!(negs.len(), 55);
            assert!(negs.iter().all(|&(i, j)| i != j && !g.has_edge(i, j)));
        }
    }

    #[test]
    fn masking_is_nested_and_leak_free() {
        let g = random_graph(40, 150, 7, true);
        let s = &split_edges(&g, 5, 0.1, 3).unwrap()[2];
        let train = masked_adjacency(&g, s, Phase::Train);
        let val = masked_adjacency(&g, s, Phase::Val);
        let test = masked_adjacency(&g, s, Phase::Test);
        for &(i, j) in s.val_pos.iter().chain(&s.test_pos) {
            assert_eq!(train.values[[i, j]], 0.0);
        }
        for &(i, j) in &s.test_pos {
            assert_eq!(val.values[[i, j]], 0.0);
        }
        for ((t, v), full) in train.values.iter().zip(val.values.iter()).zip(test.values.iter()) {
            assert!(t <= v && v <= full);
        }
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(test.values[[i, j]] == 1.0, g.has_edge(i, j));
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn split_invariants(seed in 0u64..1000, directed in any::<bool>(), m in 20usize..120) {
            let g = random_graph(30, m, seed, directed);
            let splits = split_edges(&g, 5, 0.1, seed).unwrap();
            let all: HashSet<Dyad> = g.canonical_edges().into_iter().collect();
            for s in &splits {
                let pos: Vec<Dyad> =
                    s.train_pos.iter().chain(&s.val_pos).chain(&s.test_pos).copied().collect();
                let pos_set: HashSet<Dyad> = pos.iter().copied().collect();
                prop_assert_eq!(pos.len(), pos_set.len());
                prop_assert_eq!(&pos_set, &all);
                let neg: Vec<Dyad> =
                    s.train_neg.iter().chain(&s.val_neg).chain(&s.test_neg).copied().collect();
                let neg_set: HashSet<Dyad> = neg.iter().copied().collect();
                prop_assert_eq!(neg.len(), neg_set.len());
                for &(i, j) in &neg {
                    prop_assert!(i != j);
                    prop_assert!(!g.has_edge(i, j));
                    prop_assert!(directed || i < j);
                }
                prop_assert_eq!(s.train_neg.len(), s.train_pos.len());
                prop_assert_eq!(s.val_neg.len(), s.val_pos.len());
                prop_assert_eq!(s.test_neg.len(), s.test_pos.len());
            }
        }
    }
}
