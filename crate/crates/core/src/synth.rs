//! Poisson mixed-membership SBM generator with planted overlapping
//! communities and a calibrated mean degree.
//!
//! Memberships are symmetric Dirichlet rows, the affinity matrix is Gamma
//! distributed (diagonal for assortative structure, full otherwise), and
//! each dyad draws `A_ij ~ Pois(M_ij)` clipped to `{0, 1}`, where
//! `M_ij = Σ_{k,l} u_ik v_jl w_kl`.

use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2};
use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeLabels};
use crate::matrix_io::{read_matrix_csv, write_matrix_csv};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Structure {
    Assortative,
    Disassortative,
}

impl std::fmt::Display for Structure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Structure::Assortative => "assortative",
            Structure::Disassortative => "disassortative",
        })
    }
}

fn default_alpha() -> f64 {
    0.05
}
fn default_one() -> f64 {
    1.0
}
fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_nodes: usize,
    pub n_communities: usize,
    pub target_avg_degree: f64,
    pub structure: Structure,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default = "default_one")]
    pub gamma_shape: f64,
    #[serde(default = "default_one")]
    pub gamma_rate: f64,
    #[serde(default = "default_true")]
    pub directed: bool,
    #[serde(default)]
    pub seed: u64,
}

impl SynthConfig {
    /// Directed network with the default Dirichlet and Gamma parameters.
    pub fn new(n_nodes: usize, n_communities: usize, target_avg_degree: f64, structure: Structure, seed: u64) -> Self {
        Self {
            n_nodes,
            n_communities,
            target_avg_degree,
            structure,
            alpha: default_alpha(),
            gamma_shape: 1.0,
            gamma_rate: 1.0,
            directed: true,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.n_communities < 1 || self.n_nodes < self.n_communities {
            return bad(format!(
                "need N >= K >= 1, got N={} K={}",
                self.n_nodes, self.n_communities
            ));
        }
        if !(self.target_avg_degree > 0.0) {
            return bad(format!("target_avg_degree must be > 0, got {}", self.target_avg_degree));
        }
        if !(self.alpha > 0.0) || !(self.gamma_shape > 0.0) || !(self.gamma_rate > 0.0) {
            return bad("alpha, gamma_shape and gamma_rate must be > 0".into());
        }
        Ok(())
    }
}

/// Planted parameters of a generated network. `w` is already scaled by
/// `density_scale`.
#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub u: Array2<f64>,
    pub v: Array2<f64>,
    pub w: Array2<f64>,
    pub density_scale: f64,
}

#[derive(Serialize, Deserialize)]
struct GroundTruthSidecar {
    config: Option<SynthConfig>,
    density_scale: f64,
}

impl GroundTruth {
    /// Writes `U.csv`, `V.csv`, `W.csv` and `gt.json` into `dir`.
    pub fn write(&self, dir: impl AsRef<Path>, config: Option<&SynthConfig>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        write_matrix_csv(dir.join("U.csv"), self.u.view())?;
        write_matrix_csv(dir.join("V.csv"), self.v.view())?;
        write_matrix_csv(dir.join("W.csv"), self.w.view())?;
        let sidecar = GroundTruthSidecar {
            config: config.cloned(),
            density_scale: self.density_scale,
        };
        let path = dir.join("gt.json");
        fs::write(&path, serde_json::to_string_pretty(&sidecar)?).map_err(|e| Error::io(&path, e))
    }

    pub fn read(dir: impl AsRef<Path>) -> Result<(Self, Option<SynthConfig>)> {
        let dir = dir.as_ref();
        let path = dir.join("gt.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let sidecar: GroundTruthSidecar = serde_json::from_str(&text)?;
        let gt = GroundTruth {
            u: read_matrix_csv(dir.join("U.csv"))?,
            v: read_matrix_csv(dir.join("V.csv"))?,
            w: read_matrix_csv(dir.join("W.csv"))?,
            density_scale: sidecar.density_scale,
        };
        Ok((gt, sidecar.config))
    }
}

fn dirichlet_row<R: Rng>(k: usize, gamma: &Gamma<f64>, rng: &mut R) -> Vec<f64> {
    loop {
        let draws: Vec<f64> = (0..k).map(|_| gamma.sample(rng)).collect();
        let total: f64 = draws.iter().sum();
        // tiny alpha can underflow every draw to zero; resample
        if total > 0.0 && total.is_finite() {
            return draws.into_iter().map(|d| d / total).collect();
        }
    }
}

/// Symmetric Dirichlet(alpha) rows via normalized Gamma(alpha, 1) draws.
/// `U` is drawn first, then `V` independently; undirected networks reuse `U`.
pub fn sample_memberships<R: Rng>(
    n: usize,
    k: usize,
    alpha: f64,
    directed: bool,
    rng: &mut R,
) -> Result<(Array2<f64>, Array2<f64>)> {
    let gamma = Gamma::new(alpha, 1.0)
        .map_err(|e| Error::InvalidArgument(format!("Dirichlet alpha {alpha}: {e}")))?;
    let draw = |rng: &mut R| -> Array2<f64> {
        let mut m = Array2::zeros((n, k));
        for mut row in m.rows_mut() {
            for (dst, v) in row.iter_mut().zip(dirichlet_row(k, &gamma, rng)) {
                *dst = v;
            }
        }
        m
    };
    let u = draw(rng);
    let v = if directed { draw(rng) } else { u.clone() };
    Ok((u, v))
}

/// Gamma(shape, rate) affinities: diagonal only when assortative, a full
/// matrix otherwise. `symmetric` mirrors the upper triangle.
pub fn sample_affinity<R: Rng>(
    k: usize,
    structure: Structure,
    shape: f64,
    rate: f64,
    symmetric: bool,
    rng: &mut R,
) -> Result<Array2<f64>> {
    // rand_distr parameterizes Gamma by scale
    let gamma = Gamma::new(shape, 1.0 / rate)
        .map_err(|e| Error::InvalidArgument(format!("Gamma({shape}, {rate}): {e}")))?;
    let mut w = Array2::zeros((k, k));
    match structure {
        Structure::Assortative => {
            for c in 0..k {
                w[[c, c]] = gamma.sample(rng);
            }
        }
        Structure::Disassortative => {
            for a in 0..k {
                for b in 0..k {
                    if symmetric && b < a {
                        w[[a, b]] = w[[b, a]];
                    } else {
                        w[[a, b]] = gamma.sample(rng);
                    }
                }
            }
        }
    }
    Ok(w)
}

/// `M_ij = Σ_{k,l} u_ik v_jl w_kl`.
pub fn expected_rate(u: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>, i: usize, j: usize) -> f64 {
    let ui = u.row(i);
    let vj = v.row(j);
    let mut total = 0.0;
    for (k, &uik) in ui.iter().enumerate() {
        if uik == 0.0 {
            continue;
        }
        let mut inner = 0.0;
        for (l, &vjl) in vj.iter().enumerate() {
            inner += w[[k, l]] * vjl;
        }
        total += uik * inner;
    }
    total
}

/// Full rate matrix `U W Vᵀ` (the diagonal is ignored by callers).
pub fn rate_matrix(u: ArrayView2<'_, f64>, v: ArrayView2<'_, f64>, w: ArrayView2<'_, f64>) -> Array2<f64> {
    u.dot(&w).dot(&v.t())
}

fn expected_edges(m: &Array2<f64>, c: f64) -> f64 {
    let mut total = 0.0;
    for ((i, j), &rate) in m.indexed_iter() {
        if i != j {
            total += -(-c * rate).exp_m1();
        }
    }
    total
}

/// Finds `c` such that the expected number of clipped edges
/// `Σ_{i≠j} (1 - exp(-c·M_ij))` equals `N · target_avg_degree`, by geometric
/// bisection on `[1e-9, 1e9]`. Returns `(c·W, c)`.
pub fn calibrate_density(
    u: ArrayView2<'_, f64>,
    v: ArrayView2<'_, f64>,
    w: ArrayView2<'_, f64>,
    target_avg_degree: f64,
) -> Result<(Array2<f64>, f64)> {
    let n = u.nrows();
    let m = rate_matrix(u, v, w);
    let target = n as f64 * target_avg_degree;
    let reachable = m
        .indexed_iter()
        .filter(|&((i, j), &rate)| i != j && rate > 0.0)
        .count();
    if reachable == 0 {
        return Err(Error::UnreachableTarget("all expected rates are zero".into()));
    }
    if target >= reachable as f64 {
        return Err(Error::UnreachableTarget(format!(
            "mean degree {target_avg_degree} needs {target} edges but only {reachable} dyads have positive rate"
        )));
    }

    let (mut lo, mut hi) = (1e-9_f64, 1e9_f64);
    if expected_edges(&m, hi) < target {
        return Err(Error::UnreachableTarget(format!(
            "mean degree {target_avg_degree} not reached at the largest scale {hi}"
        )));
    }
    if expected_edges(&m, lo) > target {
        return Err(Error::UnreachableTarget(format!(
            "mean degree {target_avg_degree} exceeded at the smallest scale {lo}"
        )));
    }
    while hi / lo - 1.0 > 1e-10 {
        let mid = (lo * hi).sqrt();
        if expected_edges(&m, mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = (lo * hi).sqrt();
    Ok((w.mapv(|x| x * c), c))
}

/// Samples a network and its planted parameters. Deterministic in `cfg.seed`.
///
/// Undirected networks share `V = U`, mirror `W` and draw only `i < j`.
pub fn generate(cfg: &SynthConfig) -> Result<(Graph, GroundTruth)> {
    cfg.validate()?;
    let mut rng = rng_from_seed(cfg.seed);
    let (n, k) = (cfg.n_nodes, cfg.n_communities);
    let (u, v) = sample_memberships(n, k, cfg.alpha, cfg.directed, &mut rng)?;
    let w = sample_affinity(k, cfg.structure, cfg.gamma_shape, cfg.gamma_rate, !cfg.directed, &mut rng)?;
    let (w, density_scale) = calibrate_density(u.view(), v.view(), w.view(), cfg.target_avg_degree)?;
    let m = rate_matrix(u.view(), v.view(), w.view());

    let mut dyads = Vec::new();
    for i in 0..n {
        let start = if cfg.directed { 0 } else { i + 1 };
        for j in start..n {
            if i == j {
                continue;
            }
            let rate = m[[i, j]];
            if rate <= 0.0 {
                continue;
            }
            let draw: f64 = Poisson::new(rate)
                .map_err(|e| Error::InvalidArgument(format!("Poisson rate {rate}: {e}")))?
                .sample(&mut rng);
            if draw >= 1.0 {
                dyads.push((i, j));
            }
        }
    }
    let graph = Graph::new(n, cfg.directed, dyads)?;
    Ok((
        graph,
        GroundTruth {
            u,
            v,
            w,
            density_scale,
        },
    ))
}

/// Row-wise argmax of `U`; ties go to the lowest community index.
pub fn gt_scalar_feature(gt: &GroundTruth) -> NodeLabels {
    argmax_rows(gt.u.view())
}

pub(crate) fn argmax_rows(m: ArrayView2<'_, f64>) -> NodeLabels {
    NodeLabels(
        m.rows()
            .into_iter()
            .map(|row| {
                let mut best = 0;
                for (k, &x) in row.iter().enumerate() {
                    if x > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect(),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{average_degree, edge_homophily};
    use crate::rng::BenchRng;
    use ndarray::array;

    fn rng(seed: u64) -> BenchRng {
        rng_from_seed(seed)
    }

    #[test]
    fn membership_rows_sum_to_one() {
        let (u, v) = sample_memberships(200, 5, 0.05, true, &mut rng(1)).unwrap();
        for row in u.rows().into_iter().chain(v.rows()) {
            assert!((row.sum() - 1.0).abs() < 1e-12);
            assert!(row.iter().all(|&x| x >= 0.0));
        }
        assert_ne!(u, v);
        let (u, v) = sample_memberships(20, 3, 0.05, false, &mut rng(1)).unwrap();
        assert_eq!(u, v);
    }

    #[test]
    fn large_alpha_rows_are_near_uniform() {
        let (u, _) = sample_memberships(1000, 5, 100.0, true, &mut rng(2)).unwrap();
        let flat = u
            .rows()
            .into_iter()
            .filter(|r| r.iter().cloned().fold(0.0, f64::max) < 0.5)
            .count();
        assert!(flat as f64 >= 0.95 * 1000.0);
    }

    #[test]
    fn small_alpha_rows_are_concentrated() {
        // Monte-Carlo reference straight from Gamma normalization
        let gamma = Gamma::new(0.05, 1.0).unwrap();
        let mut r = rng(99);
        let reference: f64 = (0..1000)
            .map(|_| {
                let row = dirichlet_row(5, &gamma, &mut r);
                row.into_iter().fold(0.0, f64::max)
            })
            .sum::<f64>()
            / 1000.0;
        assert!(reference > 0.85);

        let (u, _) = sample_memberships(1000, 5, 0.05, true, &mut rng(3)).unwrap();
        let mean_max = u
            .rows()
            .into_iter()
            .map(|r| r.iter().cloned().fold(0.0, f64::max))
            .sum::<f64>()
            / 1000.0;
        assert!((mean_max - reference).abs() < 0.03, "mean row max {mean_max} vs {reference}");
    }

    #[test]
    fn assortative_affinity_is_diagonal() {
        let w = sample_affinity(3, Structure::Assortative, 1.0, 1.0, false, &mut rng(4)).unwrap();
        let nonzero: Vec<(usize, usize)> =
            w.indexed_iter().filter(|(_, &x)| x != 0.0).map(|(ix, _)| ix).collect();
        assert_eq!(nonzero, vec![(0, 0), (1, 1), (2, 2)]);
    }

    #[test]
    fn disassortative_affinity_positive_and_gamma_mean() {
        let w = sample_affinity(4, Structure::Disassortative, 1.0, 1.0, false, &mut rng(5)).unwrap();
        assert!(w.iter().all(|&x| x > 0.0));
        let sym = sample_affinity(4, Structure::Disassortative, 1.0, 1.0, true, &mut rng(5)).unwrap();
        assert_eq!(sym, sym.t());

        let mut r = rng(6);
        let mut total = 0.0;
        let draws = 10_000 / 25;
        for _ in 0..draws {
            total += sample_affinity(5, Structure::Disassortative, 1.0, 1.0, false, &mut r).unwrap().sum();
        }
        let mean = total / (draws * 25) as f64;
        assert!((mean - 1.0).abs() < 0.05, "mean {mean}");
    }

    #[test]
    fn expected_rate_scalar_and_zero_cases() {
        let one = array![[1.0]];
        assert_eq!(expected_rate(one.view(), one.view(), array![[2.5]].view(), 0, 0), 2.5);
        let u = array![[0.2, 0.8], [0.5, 0.5]];
        let w = Array2::zeros((2, 2));
        assert_eq!(expected_rate(u.view(), u.view(), w.view(), 0, 1), 0.0);
    }

    #[test]
    fn expected_rate_matches_triple_loop() {
        let mut r = rng(7);
        let u = Array2::from_shape_fn((4, 3), |_| r.random::<f64>());
        let v = Array2::from_shape_fn((4, 3), |_| r.random::<f64>());
        let w = Array2::from_shape_fn((3, 3), |_| r.random::<f64>());
        let m = rate_matrix(u.view(), v.view(), w.view());
        for i in 0..4 {
            for j in 0..4 {
                let mut brute = 0.0;
                for k in 0..3 {
                    for l in 0..3 {
                        brute += u[[i, k]] * v[[j, l]] * w[[k, l]];
                    }
                }
                assert!((expected_rate(u.view(), v.view(), w.view(), i, j) - brute).abs() < 1e-12);
                assert!((m[[i, j]] - brute).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn calibration_fixed_point_and_scaling() {
        let (u, v) = sample_memberships(100, 5, 0.05, true, &mut rng(8)).unwrap();
        let w = sample_affinity(5, Structure::Disassortative, 1.0, 1.0, false, &mut rng(9)).unwrap();
        let (w1, c1) = calibrate_density(u.view(), v.view(), w.view(), 2.0).unwrap();
        assert!(c1 > 0.0);
        let (_, again) = calibrate_density(u.view(), v.view(), w1.view(), 2.0).unwrap();
        assert!((again - 1.0).abs() < 1e-6, "c = {again}");

        // sparse regime: expected edges are near-linear in c
        let (_, c_low) = calibrate_density(u.view(), v.view(), w.view(), 0.2).unwrap();
        let (_, c_high) = calibrate_density(u.view(), v.view(), w.view(), 0.4).unwrap();
        let ratio = c_high / c_low;
        assert!((1.9..2.2).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn calibration_rejects_unreachable_target() {
        let (u, v) = sample_memberships(10, 2, 1.0, true, &mut rng(10)).unwrap();
        let w = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(matches!(
            calibrate_density(u.view(), v.view(), w.view(), 9.0),
            Err(Error::UnreachableTarget(_))
        ));
        let zero = Array2::zeros((2, 2));
        assert!(calibrate_density(u.view(), v.view(), zero.view(), 1.0).is_err());
    }

    #[test]
    fn generation_is_deterministic_and_well_formed() {
        let cfg = SynthConfig::new(100, 5, 20.0, Structure::Assortative, 17);
        let (g1, gt1) = generate(&cfg).unwrap();
        let (g2, gt2) = generate(&cfg).unwrap();
        assert_eq!(g1.edges(), g2.edges());
        assert_eq!(gt1, gt2);
        assert!(g1.edges().iter().all(|&(i, j)| i != j && i < 100 && j < 100));
        assert!(gt1.w.indexed_iter().all(|((a, b), &x)| a == b || x == 0.0));
    }

    #[test]
    fn realized_degree_tracks_target() {
        for seed in 0..10 {
            let cfg = SynthConfig::new(100, 5, 20.0, Structure::Disassortative, seed);
            let (g, _) = generate(&cfg).unwrap();
            let k = average_degree(&g);
            assert!((k - 20.0).abs() < 2.0, "seed {seed}: degree {k}");
        }
    }

    #[test]
    fn undirected_generation_is_symmetric() {
        let mut cfg = SynthConfig::new(80, 4, 6.0, Structure::Disassortative, 3);
        cfg.directed = false;
        let (g, gt) = generate(&cfg).unwrap();
        assert!(!g.is_directed());
        assert_eq!(gt.u, gt.v);
        assert_eq!(gt.w, gt.w.t());
        let k = average_degree(&g);
        assert!((k - 6.0).abs() < 0.6 * 2.0, "degree {k}");
    }

    #[test]
    fn assortative_networks_are_more_homophilous() {
        let mean_h = |structure| {
            (0..10)
                .map(|seed| {
                    let (g, gt) = generate(&SynthConfig::new(100, 5, 20.0, structure, seed)).unwrap();
                    edge_homophily(&g, &gt_scalar_feature(&gt)).unwrap()
                })
                .sum::<f64>()
                / 10.0
        };
        let assortative = mean_h(Structure::Assortative);
        let disassortative = mean_h(Structure::Disassortative);
        assert!(assortative > 0.2, "assortative h {assortative}");
        assert!(assortative > disassortative, "{assortative} vs {disassortative}");
    }

    #[test]
    fn argmax_tie_breaking() {
        let gt = GroundTruth {
            u: array![[0.0, 0.0, 1.0, 0.0, 0.0], [0.2, 0.2, 0.2, 0.2, 0.2]],
            v: Array2::zeros((2, 5)),
            w: Array2::zeros((5, 5)),
            density_scale: 1.0,
        };
        assert_eq!(gt_scalar_feature(&gt).0, vec![2, 0]);

        let (_, gt) = generate(&SynthConfig::new(60, 4, 5.0, Structure::Assortative, 1)).unwrap();
        assert!(gt_scalar_feature(&gt).as_slice().iter().all(|&l| l < 4));
    }

    #[test]
    fn ground_truth_round_trips_through_csv() {
        let cfg = SynthConfig::new(30, 3, 4.0, Structure::Assortative, 2);
        let (_, gt) = generate(&cfg).unwrap();
        let dir = tempfile::tempdir().unwrap();
        gt.write(dir.path(), Some(&cfg)).unwrap();
        let (back, back_cfg) = GroundTruth::read(dir.path()).unwrap();
        assert_eq!(back, gt);
        assert_eq!(back_cfg, Some(cfg));
    }
}
