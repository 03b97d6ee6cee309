//! Binary sparse graphs, node labels, dataset statistics and edge splits.

mod io;
pub(crate) mod split;
mod stats;

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{load_edge_list, load_labels, IdMap};
pub use split::{masked_adjacency, split_edges, EdgeSplit, Phase, SplitManifest};
pub use stats::{average_degree, edge_homophily};

/// An ordered node pair `(source, target)`.
pub type Dyad = (usize, usize);

/// Binary adjacency over `n_nodes` nodes.
///
/// Edges are stored as ordered dyads. Undirected graphs store both
/// orientations, so `n_edges()` counts each undirected edge twice.
#[derive(Debug, Clone)]
pub struct Graph {
    n_nodes: usize,
    directed: bool,
    edges: Vec<Dyad>,
    edge_set: HashSet<Dyad>,
}

impl Graph {
    /// Builds a graph from dyads. Duplicates are merged; undirected inputs are
    /// closed under reversal. Self-loops and out-of-range indices are rejected.
    pub fn new(n_nodes: usize, directed: bool, dyads: impl IntoIterator<Item = Dyad>) -> Result<Self> {
        let mut edge_set = HashSet::new();
        for (i, j) in dyads {
            if i >= n_nodes || j >= n_nodes {
                return Err(Error::InvalidArgument(format!(
                    "edge ({i}, {j}) out of range for {n_nodes} nodes"
                )));
            }
            if i == j {
                return Err(Error::InvalidArgument(format!("self-loop at node {i}")));
            }
            edge_set.insert((i, j));
            if !directed {
                edge_set.insert((j, i));
            }
        }
        let mut edges: Vec<Dyad> = edge_set.iter().copied().collect();
        edges.sort_unstable();
        Ok(Self {
            n_nodes,
            directed,
            edges,
            edge_set,
        })
    }

    pub fn empty(n_nodes: usize, directed: bool) -> Self {
        Self {
            n_nodes,
            directed,
            edges: Vec::new(),
            edge_set: HashSet::new(),
        }
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn is_directed(&self) -> bool {
        self.directed
    }

    /// Number of stored ordered dyads.
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// All stored ordered dyads, sorted.
    pub fn edges(&self) -> &[Dyad] {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edge_set.contains(&(i, j))
    }

    /// One dyad per edge: all dyads if directed, `i < j` pairs otherwise.
    pub fn canonical_edges(&self) -> Vec<Dyad> {
        if self.directed {
            self.edges.clone()
        } else {
            self.edges.iter().copied().filter(|&(i, j)| i < j).collect()
        }
    }

    /// Number of ordered (directed) or unordered (undirected) non-self dyads.
    pub fn n_candidate_dyads(&self) -> usize {
        let n = self.n_nodes;
        if n < 2 {
            return 0;
        }
        if self.directed {
            n * (n - 1)
        } else {
            n * (n - 1) / 2
        }
    }

    /// Relabels nodes so that node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n_nodes {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} nodes",
                perm.len(),
                self.n_nodes
            )));
        }
        Graph::new(
            self.n_nodes,
            self.directed,
            self.edges.iter().map(|&(i, j)| (perm[i], perm[j])),
        )
    }
}

/// Integer class per node, values in `[0, n_classes)`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NodeLabels(pub Vec<usize>);

impl NodeLabels {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    /// One past the largest label value.
    pub fn n_classes(&self) -> usize {
        self.0.iter().max().map_or(0, |&m| m + 1)
    }

    pub fn n_distinct(&self) -> usize {
        self.0.iter().collect::<HashSet<_>>().len()
    }
}
