use super::{Graph, NodeLabels};
use crate::error::{Error, Result};

/// Ordered-dyad count over node count.
///
/// For undirected graphs each edge is stored in both orientations, so this is
/// `2·|E|/N`, the usual undirected mean degree. Directed graphs give `|E|/N`
/// (mean out-degree). Returns 0 for an empty node set.
pub fn average_degree(g: &Graph) -> f64 {
    if g.n_nodes() == 0 {
        return 0.0;
    }
    g.n_edges() as f64 / g.n_nodes() as f64
}

/// Fraction of edges whose endpoints share a label. 0 when there are no edges.
pub fn edge_homophily(g: &Graph, labels: &NodeLabels) -> Result<f64> {
    if labels.len() != g.n_nodes() {
        return Err(Error::DimensionMismatch(format!(
            "{} labels for {} nodes",
            labels.len(),
            g.n_nodes()
        )));
    }
    if g.n_edges() == 0 {
        return Ok(0.0);
    }
    let l = labels.as_slice();
    let same = g.edges().iter().filter(|&&(i, j)| l[i] == l[j]).count();
    Ok(same as f64 / g.n_edges() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn degree_of_directed_cycle() {
        let g = Graph::new(3, true, [(0, 1), (1, 2), (2, 0)]).unwrap();
        assert_eq!(average_degree(&g), 1.0);
        assert_eq!(average_degree(&Graph::empty(5, true)), 0.0);
    }

    #[test]
    fn undirected_degree_counts_both_endpoints() {
        let g = Graph::new(4, false, [(0, 1), (1, 2), (2, 3)]).unwrap();
        assert_eq!(average_degree(&g), 1.5);
    }

    #[test]
    fn homophily_extremes() {
        let g = Graph::new(4, true, [(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        assert_eq!(edge_homophily(&g, &NodeLabels(vec![0; 4])).unwrap(), 1.0);
        // bipartite sides {0,2} and {1,3}
        assert_eq!(edge_homophily(&g, &NodeLabels(vec![0, 1, 0, 1])).unwrap(), 0.0);
    }

    #[test]
    fn homophily_hand_count() {
        // labels: 0 0 1 1 2 ; intra edges (0,1) and (2,3)
        let g = Graph::new(5, true, [(0, 1), (2, 3), (1, 2), (3, 4), (4, 0)]).unwrap();
        let labels = NodeLabels(vec![0, 0, 1, 1, 2]);
        let expected = g
            .edges()
            .iter()
            .filter(|&&(i, j)| labels.0[i] == labels.0[j])
            .count() as f64
            / 5.0;
        assert_eq!(expected, 0.4);
        assert_eq!(edge_homophily(&g, &labels).unwrap(), expected);
    }

    #[test]
    fn homophily_length_mismatch() {
        let g = Graph::new(3, true, [(0, 1)]).unwrap();
        assert!(edge_homophily(&g, &NodeLabels(vec![0, 1])).is_err());
    }

    proptest! {
        #[test]
        fn homophily_invariant_under_class_permutation(
            edges in proptest::collection::vec((0usize..12, 0usize..12), 1..40),
            labels in proptest::collection::vec(0usize..4, 12),
            shift in 1usize..4,
        ) {
            let g = Graph::new(12, true, edges.into_iter().filter(|(i, j)| i != j)).unwrap();
            let relabelled = NodeLabels(labels.iter().map(|l| (l + shift) % 4).collect());
            let labels = NodeLabels(labels);
            prop_assert_eq!(
                edge_homophily(&g, &labels).unwrap(),
                edge_homophily(&g, &relabelled).unwrap()
            );
        }

        #[test]
        fn degree_times_n_is_edge_count(
            edges in proptest::collection::vec((0usize..9, 0usize..9), 0..30),
            directed in any::<bool>(),
        ) {
            let g = Graph::new(9, directed, edges.into_iter().filter(|(i, j)| i != j)).unwrap();
            prop_assert_eq!((average_degree(&g) * 9.0).round() as usize, g.n_edges());
        }
    }
}
