use super::*;
use crate::eval::auc;
use crate::graph::split_edges;
use ndarray::{array, Array2};

fn random_matrix(r: usize, c: usize, rng: &mut BenchRng) -> Array2<f64> {
    Array2::from_shape_simple_fn((r, c), || rng.random_range(-1.0..1.0))
}

fn small_graph(n: usize, seed: u64) -> Graph {
    let mut rng = rng_from_seed(seed);
    let mut dyads = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < 0.4 {
                dyads.push((i, j));
            }
        }
    }
    Graph::new(n, false, dyads).unwrap()
}

/// Two dense blocks of ten nodes with a few cross links.
fn planted_blocks(seed: u64) -> Graph {
    let mut rng = rng_from_seed(seed);
    let mut dyads = Vec::new();
    for i in 0..20 {
        for j in i + 1..20 {
            let p = if (i < 10) == (j < 10) { 0.6 } else { 0.05 };
            if rng.random::<f64>() < p {
                dyads.push((i, j));
            }
        }
    }
    Graph::new(20, false, dyads).unwrap()
}

#[test]
fn propagation_small_cases() {
    let single = propagation_matrix(1, std::iter::empty());
    assert_eq!(single.to_dense(), array![[1.0]]);
    let pair = propagation_matrix(2, [(0, 1)].into_iter());
    assert_eq!(pair.to_dense(), Array2::from_elem((2, 2), 0.5));
}

#[test]
fn propagation_matches_degree_count() {
    let g = small_graph(8, 1);
    let n = g.n_nodes();
    let dyads: Vec<Dyad> = g.canonical_edges();
    let p = propagation_matrix(n, dyads.iter().copied()).to_dense();
    let degree: Vec<f64> = (0..n).map(|i| 1.0 + (0..n).filter(|&j| g.has_edge(i, j)).count() as f64).collect();
    for i in 0..n {
        for j in 0..n {
            let a = if i == j || g.has_edge(i, j) { 1.0 } else { 0.0 };
            assert!((p[[i, j]] - a / (degree[i] * degree[j]).sqrt()).abs() < 1e-15);
        }
    }
    // directed inputs are symmetrized
    let directed = propagation_matrix(3, [(0, 1), (2, 1)].into_iter()).to_dense();
    assert_eq!(directed, directed.t());
}

#[test]
fn forward_trivial_cases() {
    let x = Csr::from_dense(array![[1.0, 2.0], [3.0, 4.0]].view());
    let p = propagation_matrix(2, [(0, 1)].into_iter());
    let zero = GnnModel::from_weights(vec![Array2::zeros((2, 3)), Array2::zeros((3, 3))], false);
    assert!(forward(&zero, &x, &p, None).z.iter().all(|&v| v == 0.0));

    let one = Csr::from_dense(array![[0.3, -1.2, 5.0]].view());
    let eye = GnnModel::from_weights(vec![Array2::eye(3)], false);
    let p1 = propagation_matrix(1, std::iter::empty());
    assert_eq!(forward(&eye, &one, &p1, None).z, array![[0.3, -1.2, 5.0]]);
}

#[test]
fn forward_matches_explicit_loops() {
    let mut rng = rng_from_seed(2);
    let n = 4;
    let xd = random_matrix(n, 3, &mut rng);
    let w1 = random_matrix(3, 2, &mut rng);
    let w2 = random_matrix(2, 2, &mut rng);
    let p = propagation_matrix(n, [(0, 1), (1, 2), (2, 3), (0, 3)].into_iter());
    let pd = p.to_dense();
    let model = GnnModel::from_weights(vec![w1.clone(), w2.clone()], false);
    let z = forward(&model, &Csr::from_dense(xd.view()), &p, None).z;

    let layer = |h: &Array2<f64>, w: &Array2<f64>, relu: bool| {
        let mut out = Array2::<f64>::zeros((n, w.ncols()));
        for i in 0..n {
            for c in 0..w.ncols() {
                let mut s = 0.0;
                for j in 0..n {
                    for f in 0..w.nrows() {
                        s += pd[[i, j]] * h[[j, f]] * w[[f, c]];
                    }
                }
                out[[i, c]] = if relu { s.max(0.0) } else { s };
            }
        }
        out
    };
    let expected = layer(&layer(&xd, &w1, true), &w2, false);
    for (a, b) in z.iter().zip(expected.iter()) {
        assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn loss_hand_cases() {
    let zero = Embeddings { z: Array2::zeros((3, 2)), mu: None, logvar: None };
    let l = loss(&zero, &[(0, 1)], &[(1, 2), (0, 2)]);
    assert!((l - std::f64::consts::LN_2).abs() < 1e-15);

    let flat = Embeddings {
        z: Array2::zeros((3, 2)),
        mu: Some(Array2::zeros((3, 2))),
        logvar: Some(Array2::zeros((3, 2))),
    };
    assert_eq!(kl_term(&flat), 0.0);

    let z = array![[0.5, -1.0], [2.0, 0.25], [-0.75, 1.5]];
    let emb = Embeddings { z: z.clone(), mu: None, logvar: None };
    let pos = [(0, 1), (2, 1)];
    let neg = [(0, 2)];
    let s = |i: usize, j: usize| 1.0 / (1.0 + (-z.row(i).dot(&z.row(j))).exp());
    let expected = -(s(0, 1).ln() + s(2, 1).ln() + (1.0 - s(0, 2)).ln()) / 3.0;
    assert!((loss(&emb, &pos, &neg) - expected).abs() < 1e-12);
}

fn objective(model: &GnnModel, x: &Csr, p: &Csr, pos: &[Dyad], neg: &[Dyad], noise: &Noise, wd: f64) -> f64 {
    loss(&forward_tape(model, x, p, noise).emb, pos, neg) + decay_penalty(model, wd)
}

/// Worst relative error between analytic and central-difference gradients.
fn gradient_error(model: &GnnModel, x: &Csr, p: &Csr, pos: &[Dyad], neg: &[Dyad], noise: &Noise, wd: f64) -> f64 {
    let (_, grads) = backward(model, x, p, pos, neg, noise, wd);
    let h = 1e-5;
    let mut worst: f64 = 0.0;
    for (l, g) in grads.iter().enumerate() {
        for idx in 0..g.len() {
            let (r, c) = (idx / g.ncols(), idx % g.ncols());
            let mut plus = model.clone();
            plus.weights[l][[r, c]] += h;
            let mut minus = model.clone();
            minus.weights[l][[r, c]] -= h;
            let numeric = (objective(&plus, x, p, pos, neg, noise, wd) - objective(&minus, x, p, pos, neg, noise, wd)) / (2.0 * h);
            let analytic = g[[r, c]];
            let scale = analytic.abs().max(numeric.abs());
            if scale > 1e-6 {
                worst = worst.max((analytic - numeric).abs() / scale);
            }
        }
    }
    worst
}

fn gradient_instance(seed: u64, variational: bool, n_layers: usize, dropout: f64) -> f64 {
    let mut rng = rng_from_seed(seed);
    let n = rng.random_range(4..=8);
    let f = rng.random_range(2..=4);
    let g = small_graph(n, seed);
    let edges = g.canonical_edges();
    let x = Csr::from_dense(random_matrix(n, f, &mut rng).view());
    let p = propagation_matrix(n, edges.iter().copied());
    let cfg = GnnConfig { weight_decay: 0.01, ..GnnConfig::new(3, n_layers, variational, seed) };
    let model = GnnModel::init(f, &cfg).unwrap();
    let noise = Noise::sample(&model, &x, dropout, &mut rng);
    let pos: Vec<Dyad> = edges.iter().copied().take(4).collect();
    let neg: Vec<Dyad> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && !g.has_edge(i, j)).take(4).collect();
    gradient_error(&model, &x, &p, &pos, &neg, &noise, cfg.weight_decay)
}

#[test]
fn gradients_match_finite_differences() {
    for seed in 0..6 {
        for variational in [false, true] {
            for layers in [1, 2] {
                let err = gradient_instance(seed, variational, layers, 0.0);
                assert!(err < 1e-4, "seed {seed} vae {variational} layers {layers}: {err}");
            }
        }
    }
}

#[test]
fn gradients_with_fixed_dropout_masks() {
    for seed in 10..14 {
        let err = gradient_instance(seed, seed % 2 == 0, 2, 0.3);
        assert!(err < 1e-4, "seed {seed}: {err}");
    }
}

#[test]
fn gradient_at_zero_weights() {
    let mut rng = rng_from_seed(5);
    let x = Csr::from_dense(random_matrix(5, 3, &mut rng).view());
    let p = propagation_matrix(5, [(0, 1), (1, 2), (3, 4)].into_iter());
    let model = GnnModel::from_weights(vec![Array2::zeros((3, 2))], false);
    let err = gradient_error(&model, &x, &p, &[(0, 1), (3, 4)], &[(0, 4)], &Noise::default(), 0.0);
    assert!(err < 1e-4);
}

#[test]
fn decay_only_gradient() {
    let mut rng = rng_from_seed(6);
    let x = Csr::from_dense(random_matrix(3, 2, &mut rng).view());
    let p = propagation_matrix(3, std::iter::empty());
    let model = GnnModel::from_weights(vec![random_matrix(2, 2, &mut rng), random_matrix(2, 2, &mut rng)], false);
    let (_, grads) = backward(&model, &x, &p, &[], &[], &Noise::default(), 0.05);
    for (g, w) in grads.iter().zip(&model.weights) {
        assert_eq!(g, &(w * 0.1));
    }
}

#[test]
fn adam_first_step_and_zero_gradient() {
    let mut model = GnnModel::from_weights(vec![array![[1.0, -2.0]]], false);
    adam_step(&mut model, &[array![[3.0, -0.5]]], 0.01, 0.9, 0.999, 1e-8);
    assert!((model.weights[0][[0, 0]] - (1.0 - 0.01)).abs() < 1e-6);
    assert!((model.weights[0][[0, 1]] - (-2.0 + 0.01)).abs() < 1e-6);

    let mut still = GnnModel::from_weights(vec![array![[1.0, -2.0]]], false);
    adam_step(&mut still, &[Array2::zeros((1, 2))], 0.01, 0.9, 0.999, 1e-8);
    assert_eq!(still.weights[0], array![[1.0, -2.0]]);
}

#[test]
fn adam_matches_scalar_trace() {
    // minimize (w - 3)^2 from w = 0
    let (lr, b1, b2, eps) = (0.1, 0.9, 0.999, 1e-8);
    let mut model = GnnModel::from_weights(vec![array![[0.0]]], false);
    let (mut w, mut m, mut v) = (0.0f64, 0.0f64, 0.0f64);
    for t in 1..=10 {
        let g = 2.0 * (w - 3.0);
        m = b1 * m + (1.0 - b1) * g;
        v = b2 * v + (1.0 - b2) * g * g;
        let mhat = m / (1.0 - b1.powi(t));
        let vhat = v / (1.0 - b2.powi(t));
        w -= lr * mhat / (vhat.sqrt() + eps);

        let grad = model.weights[0].mapv(|x| 2.0 * (x - 3.0));
        adam_step(&mut model, &[grad], lr, b1, b2, eps);
        assert!((model.weights[0][[0, 0]] - w).abs() < 1e-10);
    }
}

fn planted_fold(seed: u64) -> (Graph, EdgeSplit) {
    let g = planted_blocks(seed);
    let split = split_edges(&g, 5, 0.1, seed).unwrap().remove(0);
    (g, split)
}

#[test]
fn training_improves_and_restores_best() {
    let (g, split) = planted_fold(7);
    let feats = PhaseFeatures::structure(&g, &split);
    let cfg = GnnConfig { learning_rate: 0.01, ..GnnConfig::new(16, 2, false, 3) };
    let (model, report) = train(&g, &split, &feats, &cfg).unwrap();
    let first = &report.history[0];
    let best = &report.history[report.best_epoch - 1];
    assert!(best.train_loss < first.train_loss);
    assert!(report.history.iter().all(|r| report.best_val_loss <= r.val_loss));
    let emb = embed(&model, &g, &split, &feats, Phase::Val);
    assert_eq!(loss(&emb, &split.val_pos, &split.val_neg), report.best_val_loss);
}

#[test]
fn zero_patience_stops_at_first_non_improvement() {
    let (g, split) = planted_fold(8);
    let feats = PhaseFeatures::identity(20);
    let cfg = GnnConfig { learning_rate: 0.1, patience: 0, ..GnnConfig::new(8, 1, false, 4) };
    let (_, report) = train(&g, &split, &feats, &cfg).unwrap();
    let h = &report.history;
    if h.len() < cfg.epochs {
        let last = h.len() - 1;
        assert!(h[last].val_loss >= h[..last].iter().map(|r| r.val_loss).fold(f64::INFINITY, f64::min));
        for k in 1..last {
            assert!(h[k].val_loss < h[k - 1].val_loss);
        }
    }
}

#[test]
fn training_is_deterministic_and_leak_free() {
    let (g, split) = planted_fold(9);
    let cfg = GnnConfig { dropout: 0.3, epochs: 40, ..GnnConfig::new(8, 2, true, 5) };
    let feats = PhaseFeatures::structure(&g, &split);
    let (m1, r1) = train(&g, &split, &feats, &cfg).unwrap();
    let (m2, r2) = train(&g, &split, &feats, &cfg).unwrap();
    assert_eq!(m1.weights, m2.weights);
    assert_eq!(r1, r2);

    // move a test edge elsewhere: train and validation inputs are unchanged
    let removed = split.test_pos[0];
    let edges = g.canonical_edges().into_iter().filter(|&d| d != removed).chain([split.test_neg[0]]);
    let other = Graph::new(20, false, edges).unwrap();
    let feats2 = PhaseFeatures::structure(&other, &split);
    let (m3, r3) = train(&other, &split, &feats2, &cfg).unwrap();
    assert_eq!(m1.weights, m3.weights);
    assert_eq!(r1, r3);
}

#[test]
fn resampled_negatives_are_deterministic() {
    let (g, split) = planted_fold(10);
    let cfg = GnnConfig { resample_negatives: true, epochs: 20, ..GnnConfig::new(8, 1, false, 6) };
    let feats = PhaseFeatures::identity(20);
    assert_eq!(train(&g, &split, &feats, &cfg).unwrap().1, train(&g, &split, &feats, &cfg).unwrap().1);
    let negs = sample_negatives(&split, 20, false, 30, &mut rng_from_seed(1));
    assert!(negs.iter().all(|&(i, j)| i < j && !split.train_pos.contains(&(i, j))));
}

#[test]
fn evaluation_is_deterministic_and_uses_the_mean() {
    let (g, split) = planted_fold(11);
    let cfg = GnnConfig { dropout: 0.5, epochs: 10, ..GnnConfig::new(8, 2, true, 7) };
    let feats = PhaseFeatures::structure(&g, &split);
    let (model, _) = train(&g, &split, &feats, &cfg).unwrap();
    let a = embed(&model, &g, &split, &feats, Phase::Test);
    let b = embed(&model, &g, &split, &feats, Phase::Test);
    assert_eq!(a, b);
    assert_eq!(&a.z, a.mu.as_ref().unwrap());
}

#[test]
fn score_cases() {
    let emb = Embeddings { z: array![[0.0, 0.0], [0.0, 0.0], [5.0, 5.0], [5.0, 5.0]], mu: None, logvar: None };
    assert_eq!(gnn_score(&emb, 0, 1), 0.5);
    assert!(gnn_score(&emb, 2, 3) > 0.999);

    let mut rng = rng_from_seed(12);
    let z = random_matrix(30, 3, &mut rng);
    let emb = Embeddings { z: z.clone(), mu: None, logvar: None };
    let pos: Vec<Dyad> = (0..15).map(|i| (i, i + 15)).collect();
    let neg: Vec<Dyad> = (0..15).map(|i| (i, 29 - i)).filter(|(i, j)| i != j).collect();
    let dot = |d: &[Dyad]| d.iter().map(|&(i, j)| z.row(i).dot(&z.row(j))).collect::<Vec<_>>();
    assert_eq!(
        auc(&score_dyads(&emb, &pos), &score_dyads(&emb, &neg)).unwrap(),
        auc(&dot(&pos), &dot(&neg)).unwrap()
    );
}

#[test]
fn config_validation() {
    assert!(GnnConfig { dropout: 1.0, ..GnnConfig::new(4, 1, false, 0) }.validate().is_err());
    assert!(GnnConfig::new(4, 3, false, 0).validate().is_err());
    assert!(GnnConfig::new(0, 1, false, 0).validate().is_err());
    assert!(GnnConfig::new(4, 2, true, 0).validate().is_ok());
}

#[test]
fn checkpoint_round_trip() {
    let (g, split) = planted_fold(13);
    let cfg = GnnConfig { epochs: 5, ..GnnConfig::new(4, 2, true, 8) };
    let feats = PhaseFeatures::identity(20);
    let (model, report) = train(&g, &split, &feats, &cfg).unwrap();
    let dir = tempfile::tempdir().unwrap();
    write_checkpoint(dir.path(), &model, &cfg, Some(&report)).unwrap();
    let (back, back_cfg) = read_checkpoint(dir.path()).unwrap();
    assert_eq!(back.weights, model.weights);
    assert_eq!(back_cfg, cfg);
    let history = std::fs::read_to_string(dir.path().join("history.csv")).unwrap();
    assert!(history.starts_with("epoch,train_loss,val_loss"));
    assert_eq!(history.lines().count(), report.history.len() + 1);
}
