//! Lloyd's K-means with k-means++ seeding and restarts.

use std::collections::HashSet;

use log::warn;
use ndarray::{Array2, ArrayView1, ArrayView2};
use rand::Rng;

use super::{FeatureKind, FeatureMatrix};
use crate::graph::NodeLabels;
use crate::rng::{derive_seed, rng_from_seed, BenchRng};

#[derive(Debug, Clone, PartialEq)]
pub struct KmeansResult {
    pub assignments: NodeLabels,
    pub centroids: Array2<f64>,
    pub inertia: f64,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn n_distinct_rows(x: ArrayView2<'_, f64>) -> usize {
    x.rows()
        .into_iter()
        .map(|r| r.iter().map(|v| v.to_bits()).collect::<Vec<u64>>())
        .collect::<HashSet<_>>()
        .len()
}

/// K-means with 300 Lloyd iterations and 10 k-means++ restarts.
pub fn kmeans(x: ArrayView2<'_, f64>, k: usize, seed: u64) -> KmeansResult {
    kmeans_with(x, k, seed, 300, 10)
}

/// Best of `n_init` runs by inertia. `k` is reduced to the number of
/// distinct rows when larger.
pub fn kmeans_with(
    x: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    max_iter: usize,
    n_init: usize,
) -> KmeansResult {
    let n = x.nrows();
    assert!(n > 0, "kmeans on an empty matrix");
    let distinct = n_distinct_rows(x);
    let k = if k > distinct {
        warn!("kmeans: k={k} exceeds {distinct} distinct rows; using k={distinct}");
        distinct
    } else {
        k.max(1)
    };

    let mut best: Option<KmeansResult> = None;
    for run in 0..n_init.max(1) {
        let mut rng = rng_from_seed(derive_seed(seed, run as u64));
        let result = lloyd(x, k, max_iter, &mut rng);
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    best.expect("at least one run")
}

fn plus_plus_init(x: ArrayView2<'_, f64>, k: usize, rng: &mut BenchRng) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = x.rows().into_iter().map(|r| sq_dist(r, x.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if d > 0.0 && target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            if d2[chosen] == 0.0 {
                // float drift at the tail; take the last positive weight
                chosen = d2.iter().rposition(|&d| d > 0.0).unwrap_or(chosen);
            }
            chosen
        } else {
            rng.random_range(0..n)
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for (i, r) in x.rows().into_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, x.row(pick)));
        }
    }
    centroids
}

fn nearest(row: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, centroid) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(row, centroid);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn lloyd(x: ArrayView2<'_, f64>, k: usize, max_iter: usize, rng: &mut BenchRng) -> KmeansResult {
    let n = x.nrows();
    let mut centroids = plus_plus_init(x, k, rng);
    let mut assign = vec![usize::MAX; n];
    let mut dist = vec![0.0; n];

    for _ in 0..max_iter.max(1) {
        let mut changed = false;
        for (i, row) in x.rows().into_iter().enumerate() {
            let (c, d) = nearest(row, &centroids);
            if assign[i] != c {
                assign[i] = c;
                changed = true;
            }
            dist[i] = d;
        }
        if !changed {
            break;
        }
        update_centroids(x, &mut assign, &mut dist, &mut centroids);
    }

    let inertia = x
        .rows()
        .into_iter()
        .zip(&assign)
        .map(|(r, &c)| sq_dist(r, centroids.row(c)))
        .sum();
    KmeansResult {
        assignments: NodeLabels(assign),
        centroids,
        inertia,
    }
}

/// Recomputes means; an empty cluster takes the point farthest from its
/// current centroid.
fn update_centroids(
    x: ArrayView2<'_, f64>,
    assign: &mut [usize],
    dist: &mut [f64],
    centroids: &mut Array2<f64>,
) {
    let k = centroids.nrows();
    loop {
        let mut counts = vec![0usize; k];
        for &c in assign.iter() {
            counts[c] += 1;
        }
        let Some(empty) = counts.iter().position(|&c| c == 0) else {
            break;
        };
        let far = (0..assign.len())
            .filter(|&i| counts[assign[i]] > 1)
            .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
            .expect("k <= distinct rows leaves a donor cluster");
        assign[far] = empty;
        dist[far] = 0.0;
    }
    centroids.fill(0.0);
    let mut counts = vec![0usize; k];
    for (row, &c) in x.rows().into_iter().zip(assign.iter()) {
        let mut target = centroids.row_mut(c);
        target += &row;
        counts[c] += 1;
    }
    for (mut row, &count) in centroids.rows_mut().into_iter().zip(&counts) {
        row /= count as f64;
    }
}

/// Replaces features by their K-means cluster label: an N×1 column.
pub fn clustered_feature(x: &FeatureMatrix, k: usize, seed: u64) -> FeatureMatrix {
    let result = kmeans(x.values.view(), k, seed);
    let column = Array2::from_shape_fn((x.n_nodes(), 1), |(i, _)| result.assignments.0[i] as f64);
    FeatureMatrix::new(column, FeatureKind::Clustered)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Axis};
    use rand_distr::{Distribution, StandardNormal};

    fn blobs(seed: u64) -> Array2<f64> {
        let mut rng = rng_from_seed(seed);
        Array2::from_shape_fn((40, 2), |(i, _)| {
            let centre = if i < 20 { -10.0 } else { 10.0 };
            let noise: f64 = StandardNormal.sample(&mut rng);
            centre + noise
        })
    }

    #[test]
    fn separable_clouds_recovered() {
        let x = blobs(1);
        let r = kmeans(x.view(), 2, 7);
        let a = &r.assignments.0;
        assert!(a[..20].iter().all(|&c| c == a[0]));
        assert!(a[20..].iter().all(|&c| c == a[20]));
        assert_ne!(a[0], a[20]);
    }

    #[test]
    fn single_cluster_is_column_mean() {
        let x = blobs(2);
        let r = kmeans(x.view(), 1, 0);
        let mean = x.mean_axis(Axis(0)).unwrap();
        for (c, m) in r.centroids.row(0).iter().zip(mean.iter()) {
            assert!((c - m).abs() < 1e-12);
        }
        let total_var = x.var_axis(Axis(0), 0.0).sum() * x.nrows() as f64;
        assert!((r.inertia - total_var).abs() < 1e-9 * total_var);
    }

    #[test]
    fn k_reduced_to_distinct_rows() {
        let x = array![[1.0, 1.0], [1.0, 1.0], [2.0, 0.0]];
        let r = kmeans(x.view(), 3, 0);
        assert_eq!(r.centroids.nrows(), 2);
        assert_eq!(r.assignments.0[0], r.assignments.0[1]);
    }

    #[test]
    fn matches_exhaustive_two_cluster_optimum() {
        // every 2-partition of 10 points, each followed by one Lloyd step
        let mut rng = rng_from_seed(11);
        let x = Array2::from_shape_fn((10, 2), |(i, j)| {
            let noise: f64 = StandardNormal.sample(&mut rng);
            let centre = if i % 3 == 0 { 2.0 } else { -1.0 };
            centre * (j as f64 + 1.0) + noise
        });
        let found = kmeans(x.view(), 2, 3);

        let inertia_of = |labels: &[usize]| -> Option<f64> {
            let mut sums = [[0.0; 2]; 2];
            let mut counts = [0usize; 2];
            for (i, &c) in labels.iter().enumerate() {
                sums[c][0] += x[[i, 0]];
                sums[c][1] += x[[i, 1]];
                counts[c] += 1;
            }
            if counts.contains(&0) {
                return None;
            }
            let cent: Vec<[f64; 2]> = (0..2)
                .map(|c| [sums[c][0] / counts[c] as f64, sums[c][1] / counts[c] as f64])
                .collect();
            let d = |i: usize, c: usize| {
                (x[[i, 0]] - cent[c][0]).powi(2) + (x[[i, 1]] - cent[c][1]).powi(2)
            };
            // one refinement: reassign, then score against refreshed means
            let refined: Vec<usize> = (0..10).map(|i| if d(i, 1) < d(i, 0) { 1 } else { 0 }).collect();
            let mut s2 = [[0.0; 2]; 2];
            let mut n2 = [0usize; 2];
            for (i, &c) in refined.iter().enumerate() {
                s2[c][0] += x[[i, 0]];
                s2[c][1] += x[[i, 1]];
                n2[c] += 1;
            }
            if n2.contains(&0) {
                return Some((0..10).map(|i| d(i, labels[i])).sum());
            }
            Some(
                (0..10)
                    .map(|i| {
                        let c = refined[i];
                        (x[[i, 0]] - s2[c][0] / n2[c] as f64).powi(2)
                            + (x[[i, 1]] - s2[c][1] / n2[c] as f64).powi(2)
                    })
                    .sum(),
            )
        };
        let best_enumerated = (0u32..1 << 10)
            .filter_map(|mask| {
                let labels: Vec<usize> = (0..10).map(|i| ((mask >> i) & 1) as usize).collect();
                inertia_of(&labels)
            })
            .fold(f64::INFINITY, f64::min);
        assert!(found.inertia <= best_enumerated + 1e-9);
    }

    #[test]
    fn clustered_feature_is_single_column_of_assignments() {
        let x = FeatureMatrix::new(blobs(3), FeatureKind::Attribute);
        let f = clustered_feature(&x, 3, 5);
        assert_eq!(f.n_features(), 1);
        assert_eq!(f.kind, FeatureKind::Clustered);
        let r = kmeans(x.values.view(), 3, 5);
        for (v, &a) in f.values.column(0).iter().zip(&r.assignments.0) {
            assert_eq!(*v, a as f64);
        }
        assert!(f.values.iter().all(|&v| (0.0..3.0).contains(&v)));
    }

    #[test]
    fn identical_rows_share_labels() {
        let x = array![[0.0, 1.0], [5.0, 5.0], [0.0, 1.0], [5.0, 5.0], [9.0, 0.0]];
        let f = clustered_feature(&FeatureMatrix::new(x, FeatureKind::Attribute), 2, 1);
        assert_eq!(f.values[[0, 0]], f.values[[2, 0]]);
        assert_eq!(f.values[[1, 0]], f.values[[3, 0]]);
    }

    #[test]
    fn permutation_equivariant_partition() {
        let x = blobs(4);
        let perm: Vec<usize> = (0..40).rev().collect();
        let px = Array2::from_shape_fn((40, 2), |(i, j)| x[[perm[i], j]]);
        let a = kmeans(x.view(), 2, 9).assignments.0;
        let b = kmeans(px.view(), 2, 9).assignments.0;
        for i in 0..40 {
            for j in 0..40 {
                assert_eq!(a[perm[i]] == a[perm[j]], b[i] == b[j]);
            }
        }
    }
}
