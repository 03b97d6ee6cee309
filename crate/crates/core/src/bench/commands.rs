use std::collections::HashMap;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use log::{info, warn};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::config::{DatasetSpec, ExperimentConfig, ModelArm, SyntheticFeatures};
use super::dataset::{Dataset, DatasetStats};
use super::results::{write_json, ResultRow, ResultWriter, RowContext};
use crate::error::{Error, Result};
use crate::eval::{
    self, evaluate, fold_seed, grid_search, gnn_features, mtcov_attribute, score_fold, AucReport, EvalData, Family,
    FeaturePolicy, Hyperparameters, ModelSpec,
};
use crate::features::{kmeans, randomize_scalar, shuffle_features, FeatureMatrix, PerturbationManifest};
use crate::gnn::{self, GnnConfig};
use crate::graph::{split_edges, EdgeSplit, IdMap, NodeLabels, Phase};
use crate::matrix_io::{read_matrix_csv, write_matrix_csv};
use crate::pgm::{self, hard_memberships, PgmFitConfig, PgmMetadata, PgmParams};
use crate::rng::derive_seed;
use crate::synth::{generate, gt_scalar_feature, Structure, SynthConfig};

/// Per-replicate seed streams, all derived from the experiment seed.
pub fn data_seed(cfg: &ExperimentConfig, replicate: usize) -> u64 {
    derive_seed(cfg.seed, 100 + replicate as u64)
}
pub fn split_seed(cfg: &ExperimentConfig, replicate: usize) -> u64 {
    derive_seed(cfg.seed, 200 + replicate as u64)
}
pub fn model_seed(cfg: &ExperimentConfig, replicate: usize) -> u64 {
    derive_seed(cfg.seed, 300 + replicate as u64)
}
pub fn noise_seed(cfg: &ExperimentConfig, replicate: usize, rho: f64) -> u64 {
    // keyed on the value of rho so each level gets its own subset
    derive_seed(derive_seed(cfg.seed, 400 + replicate as u64), (rho * 1e6).round() as u64)
}

/// Outcome of a command: where things were written and how many fits failed.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub files: Vec<PathBuf>,
    pub rows: Vec<ResultRow>,
    pub n_failed: usize,
}

fn out_path(cfg: &ExperimentConfig, name: &str) -> PathBuf {
    cfg.output_dir.join(name)
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn load_replicate(cfg: &ExperimentConfig, spec: &DatasetSpec, replicate: usize) -> Result<Dataset> {
    Dataset::load(spec, data_seed(cfg, replicate), cfg.synthetic_features)
}

/// Synthetic datasets get one network per replicate; file datasets are
/// loaded once and only the split and model seeds vary.
fn splits_for(cfg: &ExperimentConfig, ds: &Dataset, replicate: usize) -> Result<Vec<EdgeSplit>> {
    split_edges(&ds.graph, cfg.n_folds, cfg.val_fraction, split_seed(cfg, replicate))
}

/// Every grid candidate of `arm`, seeded with `seed`.
pub fn arm_candidates(cfg: &ExperimentConfig, arm: ModelArm, seed: u64) -> Vec<ModelSpec> {
    match arm.family {
        Family::Mt | Family::Mtcov => {
            let base = PgmFitConfig {
                k: 1,
                max_iter: cfg.pgm.max_iter,
                rel_tol: cfg.pgm.rel_tol,
                n_restarts: cfg.pgm.n_restarts,
                epsilon: cfg.pgm.epsilon,
                seed,
            };
            cfg.pgm_grid.expand(arm.family, arm.feature_policy, &base)
        }
        Family::Gae | Family::Vgae => {
            let base = GnnConfig {
                epochs: cfg.gnn.epochs,
                patience: cfg.gnn.patience,
                resample_negatives: cfg.gnn.resample_negatives,
                ..GnnConfig::new(32, 1, arm.family == Family::Vgae, seed)
            };
            cfg.gnn_grid.expand(&base, arm.feature_policy)
        }
    }
}

/// Whether `ds` carries the data `arm` needs. Clustered features fall back
/// to adjacency rows, so only the attribute policy can be unavailable.
pub fn arm_available(arm: ModelArm, ds: &Dataset) -> bool {
    match (arm.family, arm.feature_policy) {
        (Family::Mtcov, FeaturePolicy::Attribute) => ds.scalar_attribute.is_some(),
        (_, FeaturePolicy::Attribute) => ds.features.is_some(),
        _ => true,
    }
}

pub fn default_arms(experiment: &str) -> Vec<ModelArm> {
    use Family::*;
    use FeaturePolicy::*;
    let arms: &[(Family, FeaturePolicy)] = match experiment {
        "noise" => &[(Mt, None), (Mtcov, Attribute), (Gae, Attribute), (Vgae, Attribute)],
        "heterophily" => &[
            (Mt, None),
            (Mtcov, Attribute),
            (Gae, Structure),
            (Gae, Attribute),
            (Gae, Clustered),
            (Vgae, Structure),
            (Vgae, Attribute),
        ],
        "features" => &[
            (Mt, None),
            (Mtcov, Attribute),
            (Mtcov, Clustered),
            (Gae, Structure),
            (Gae, Attribute),
            (Gae, Clustered),
            (Vgae, Structure),
            (Vgae, Attribute),
            (Vgae, Clustered),
        ],
        _ => &[(Mt, None)],
    };
    arms.iter().map(|&(f, p)| ModelArm::new(f, p)).collect()
}

fn arms_for(cfg: &ExperimentConfig, experiment: &str) -> Vec<ModelArm> {
    if cfg.models.is_empty() {
        default_arms(experiment)
    } else {
        cfg.models.clone()
    }
}

/// Selection record for one arm on one dataset replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArmSummary {
    pub dataset: String,
    pub replicate: usize,
    pub rho: Option<f64>,
    pub model: String,
    pub feature_policy: String,
    pub homophily: Option<f64>,
    pub n_candidates: usize,
    pub mean_val_auc: Option<f64>,
    pub selected: ModelSpec,
    pub test_auc_mean: f64,
    pub test_auc_std: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentSummary {
    pub experiment: String,
    pub config: ExperimentConfig,
    pub arms: Vec<ArmSummary>,
    pub skipped: Vec<String>,
    pub n_failed: usize,
}

fn summarize(ctx: &RowContext, arm: ModelArm, n_candidates: usize, report: &AucReport) -> ArmSummary {
    ArmSummary {
        dataset: ctx.dataset.clone(),
        replicate: ctx.replicate,
        rho: ctx.rho,
        model: arm.family.name().into(),
        feature_policy: arm.feature_policy.name().into(),
        homophily: ctx.homophily,
        n_candidates,
        mean_val_auc: report.mean_val_auc(),
        selected: report.spec.clone(),
        test_auc_mean: report.mean,
        test_auc_std: report.std,
    }
}

/// Grid-searches `arm` (or evaluates it directly if the grid is a single
/// point) and returns the selected report.
pub fn select_arm(
    cfg: &ExperimentConfig,
    arm: ModelArm,
    seed: u64,
    data: &EvalData<'_>,
    splits: &[EdgeSplit],
) -> Result<(AucReport, usize)> {
    let candidates = arm_candidates(cfg, arm, seed);
    let report = if candidates.len() == 1 {
        evaluate(&candidates[0], data, splits)?
    } else {
        grid_search(&candidates, data, splits)?.report
    };
    Ok((report, candidates.len()))
}

fn placeholder_spec(cfg: &ExperimentConfig, arm: ModelArm, seed: u64) -> ModelSpec {
    arm_candidates(cfg, arm, seed).into_iter().next().unwrap_or_else(|| ModelSpec::mt(1, seed))
}

fn datasets_for(cfg: &ExperimentConfig, experiment: &str) -> Result<Vec<DatasetSpec>> {
    if experiment != "heterophily" {
        return Ok(vec![cfg.dataset.clone()]);
    }
    if !cfg.heterophily_datasets.is_empty() {
        return Ok(cfg.heterophily_datasets.clone());
    }
    match &cfg.dataset {
        DatasetSpec::Synthetic(s) => Ok([Structure::Assortative, Structure::Disassortative]
            .into_iter()
            .map(|structure| DatasetSpec::Synthetic(SynthConfig { structure, ..s.clone() }))
            .collect()),
        _ => Err(Error::InvalidArgument(
            "heterophily needs a synthetic dataset or an explicit heterophily_datasets list".into(),
        )),
    }
}

/// Shared driver of `evaluate`, `experiment features` and `experiment
/// heterophily`: every arm on every dataset replicate, one row per fold
/// plus aggregates.
fn run_arms(cfg: &ExperimentConfig, experiment: &str) -> Result<Outcome> {
    cfg.validate()?;
    create_dir(&cfg.output_dir)?;
    let csv_path = out_path(cfg, &format!("{experiment}_results.csv"));
    let mut writer = ResultWriter::create(&csv_path)?;
    let mut arms_summary = Vec::new();
    let mut skipped = Vec::new();
    for spec in datasets_for(cfg, experiment)? {
        for r in 0..cfg.replicates {
            let ds = load_replicate(cfg, &spec, r)?;
            let splits = splits_for(cfg, &ds, r)?;
            let data = ds.eval_data(cfg.n_clusters);
            let ctx = RowContext {
                experiment: experiment.into(),
                dataset: ds.name.clone(),
                replicate: r,
                data_seed: ds.data_seed,
                split_seed: split_seed(cfg, r),
                rho: None,
                homophily: ds.homophily(),
            };
            for arm in arms_for(cfg, experiment) {
                if !arm_available(arm, &ds) {
                    warn!("{}: skipping {} (no attribute data)", ds.name, arm.label());
                    skipped.push(format!("{}/{}", ds.name, arm.label()));
                    continue;
                }
                info!("{experiment}: {} replicate {r}: {}", ds.name, arm.label());
                let seed = model_seed(cfg, r);
                match with_jobs(cfg, || select_arm(cfg, arm, seed, &data, &splits)) {
                    Ok((report, n)) => {
                        writer.extend(ctx.report_rows(&report))?;
                        arms_summary.push(summarize(&ctx, arm, n, &report));
                    }
                    Err(e) => {
                        warn!("{}: {} failed: {e}", ds.name, arm.label());
                        writer.push(ctx.failed_row(&placeholder_spec(cfg, arm, seed), &e))?;
                    }
                }
            }
        }
    }
    finish(cfg, experiment, csv_path, writer, arms_summary, skipped)
}

fn with_jobs<T: Send>(cfg: &ExperimentConfig, f: impl FnOnce() -> Result<T> + Send) -> Result<T> {
    eval::with_pool(cfg.jobs, f)?
}

fn finish(
    cfg: &ExperimentConfig,
    experiment: &str,
    csv_path: PathBuf,
    writer: ResultWriter,
    arms: Vec<ArmSummary>,
    skipped: Vec<String>,
) -> Result<Outcome> {
    let n_failed = writer.n_failed();
    let summary = ExperimentSummary { experiment: experiment.into(), config: cfg.clone(), arms, skipped, n_failed };
    let json_path = out_path(cfg, &format!("{experiment}_summary.json"));
    write_json(&json_path, &summary)?;
    Ok(Outcome { files: vec![csv_path, json_path], rows: writer.rows().to_vec(), n_failed })
}

/// Cross-validated AUC of the configured model arms (default: MT).
pub fn cmd_evaluate(cfg: &ExperimentConfig) -> Result<Outcome> {
    run_arms(cfg, "evaluate")
}

/// Structure vs attribute vs clustered features for every model family.
pub fn cmd_experiment_features(cfg: &ExperimentConfig) -> Result<Outcome> {
    run_arms(cfg, "features")
}

/// Every arm on an assortative/disassortative pair (or the configured
/// datasets); rows carry the dataset's edge homophily.
pub fn cmd_experiment_heterophily(cfg: &ExperimentConfig) -> Result<Outcome> {
    run_arms(cfg, "heterophily")
}

/// Noise levels in evaluation order: 0 first, then ascending, deduplicated.
pub fn noise_levels(rho: &[f64]) -> Vec<f64> {
    let mut levels: Vec<f64> = rho.iter().copied().filter(|&r| r > 0.0).collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();
    levels.insert(0, 0.0);
    levels
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NoiseManifest {
    pub replicate: usize,
    pub rho: f64,
    pub seed: u64,
    pub features: Option<PerturbationManifest>,
    pub attribute: Option<PerturbationManifest>,
}

/// Perturbs the features and scalar attribute of `ds` at level `rho`. Both
/// use the same seed, so the same nodes are hit in each.
pub fn perturb_dataset(ds: &Dataset, rho: f64, seed: u64) -> Result<(Option<FeatureMatrix>, Option<NodeLabels>, NoiseManifest)> {
    let (features, fm) = match &ds.features {
        Some(x) => {
            let (x, m) = shuffle_features(x, rho, seed)?;
            (Some(x), Some(m))
        }
        None => (None, None),
    };
    let (attribute, am) = match &ds.scalar_attribute {
        Some(a) => {
            let (a, m) = randomize_scalar(a, rho, a.n_classes(), seed)?;
            (Some(a), Some(m))
        }
        None => (None, None),
    };
    Ok((features, attribute, NoiseManifest { replicate: 0, rho, seed, features: fm, attribute: am }))
}

/// Hyperparameters are selected once on clean data (rho = 0); the selected
/// specification is then refitted on each perturbed copy. Rows report the
/// per-fold test AUC and its difference from the clean fold.
pub fn cmd_experiment_noise(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let experiment = "noise";
    create_dir(&cfg.output_dir)?;
    let csv_path = out_path(cfg, "noise_results.csv");
    let mut writer = ResultWriter::create(&csv_path)?;
    let mut summaries = Vec::new();
    let mut skipped = Vec::new();
    let levels = noise_levels(&cfg.rho);
    for r in 0..cfg.replicates {
        let ds = load_replicate(cfg, &cfg.dataset, r)?;
        let splits = splits_for(cfg, &ds, r)?;
        let base_ctx = RowContext {
            experiment: experiment.into(),
            dataset: ds.name.clone(),
            replicate: r,
            data_seed: ds.data_seed,
            split_seed: split_seed(cfg, r),
            rho: None,
            homophily: ds.homophily(),
        };

        let mut perturbed = Vec::new();
        for &rho in &levels {
            let seed = noise_seed(cfg, r, rho);
            let (x, a, mut manifest) = perturb_dataset(&ds, rho, seed)?;
            manifest.replicate = r;
            let path = cfg
                .output_dir
                .join("noise_manifests")
                .join(format!("replicate_{r:02}"))
                .join(format!("rho_{rho}.json"));
            write_json(&path, &manifest)?;
            perturbed.push((rho, x, a));
        }

        for arm in arms_for(cfg, experiment) {
            if !arm_available(arm, &ds) {
                warn!("{}: skipping {} (no attribute data)", ds.name, arm.label());
                skipped.push(format!("{}/{}", ds.name, arm.label()));
                continue;
            }
            let seed = model_seed(cfg, r);
            let clean = ds.eval_data(cfg.n_clusters);
            let (reference, n_candidates) = match with_jobs(cfg, || select_arm(cfg, arm, seed, &clean, &splits)) {
                Ok(v) => v,
                Err(e) => {
                    let ctx = RowContext { rho: Some(0.0), ..base_ctx.clone() };
                    writer.push(ctx.failed_row(&placeholder_spec(cfg, arm, seed), &e))?;
                    continue;
                }
            };
            for (rho, x, a) in &perturbed {
                let ctx = RowContext { rho: Some(*rho), ..base_ctx.clone() };
                let report = if *rho == 0.0 || arm.family == Family::Mt {
                    // MT sees no features: its fits are identical at every level
                    Ok(reference.clone())
                } else {
                    let data = EvalData { features: x.as_ref(), scalar_attribute: a.as_ref(), ..clean };
                    with_jobs(cfg, || evaluate(&reference.spec, &data, &splits))
                };
                match report {
                    Ok(report) => {
                        writer.extend(ctx.report_rows(&report))?;
                        let spec = &report.spec;
                        let mut deltas = Vec::new();
                        for (f, f0) in report.folds.iter().zip(&reference.folds) {
                            let d = f.test_auc - f0.test_auc;
                            deltas.push(d);
                            writer.push(ctx.row(spec, f.fold.to_string(), Some(f.seed), "delta_auc", d))?;
                        }
                        let (mean, _) = eval::mean_std(&deltas);
                        writer.push(ctx.row(spec, "all".into(), None, "delta_auc_mean", mean))?;
                        summaries.push(summarize(&ctx, arm, n_candidates, &report));
                    }
                    Err(e) => writer.push(ctx.failed_row(&reference.spec, &e))?,
                }
            }
        }
    }
    finish(cfg, experiment, csv_path, writer, summaries, skipped)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedReplicate {
    pub replicate: usize,
    pub seed: u64,
    pub dir: PathBuf,
    pub n_edges: usize,
    pub avg_degree: f64,
    pub density_scale: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerateManifest {
    pub config: ExperimentConfig,
    pub replicates: Vec<GeneratedReplicate>,
}

fn write_lines(path: &Path, lines: impl IntoIterator<Item = String>) -> Result<()> {
    let mut buf = Vec::new();
    for line in lines {
        buf.extend_from_slice(line.as_bytes());
        buf.push(b'\n');
    }
    fs::File::create(path).and_then(|mut f| f.write_all(&buf)).map_err(|e| Error::io(path, e))
}

/// Writes one directory per replicate: `edges.tsv`, `nodes.txt`,
/// `labels.tsv`, `features.csv` (rows of U), `U.csv`, `V.csv`, `W.csv` and
/// `gt.json`, plus a top-level `manifest.json` with every seed.
pub fn cmd_generate(cfg: &ExperimentConfig) -> Result<Outcome> {
    cfg.validate()?;
    let DatasetSpec::Synthetic(base) = &cfg.dataset else {
        return Err(Error::InvalidArgument("generate needs a synthetic dataset".into()));
    };
    create_dir(&cfg.output_dir)?;
    let mut replicates = Vec::new();
    let mut files = Vec::new();
    for r in 0..cfg.replicates {
        let seed = data_seed(cfg, r);
        let synth = SynthConfig { seed, ..base.clone() };
        let (g, gt) = generate(&synth)?;
        let dir = cfg.output_dir.join(format!("replicate_{r:02}"));
        create_dir(&dir)?;
        let edges = dir.join("edges.tsv");
        write_lines(&edges, g.canonical_edges().iter().map(|(i, j)| format!("{i}\t{j}")))?;
        write_lines(&dir.join("nodes.txt"), (0..g.n_nodes()).map(|i| i.to_string()))?;
        let labels = gt_scalar_feature(&gt);
        write_lines(&dir.join("labels.tsv"), labels.0.iter().enumerate().map(|(i, l)| format!("{i}\t{l}")))?;
        if cfg.synthetic_features == SyntheticFeatures::Membership {
            write_matrix_csv(dir.join("features.csv"), gt.u.view())?;
        }
        gt.write(&dir, Some(&synth))?;
        replicates.push(GeneratedReplicate {
            replicate: r,
            seed,
            dir: dir.clone(),
            n_edges: g.canonical_edges().len(),
            avg_degree: crate::graph::average_degree(&g),
            density_scale: gt.density_scale,
        });
        files.push(edges);
    }
    let manifest = out_path(cfg, "manifest.json");
    write_json(&manifest, &GenerateManifest { config: cfg.clone(), replicates })?;
    files.push(manifest);
    Ok(Outcome { files, ..Default::default() })
}

/// Dataset statistics: one row per dataset (per replicate for synthetic
/// data). Written to `stats.csv`; missing columns are `-`.
pub fn cmd_stats(cfg: &ExperimentConfig) -> Result<(Vec<DatasetStats>, PathBuf)> {
    cfg.validate()?;
    let mut specs = vec![cfg.dataset.clone()];
    specs.extend(cfg.heterophily_datasets.iter().cloned());
    let mut stats = Vec::new();
    for spec in &specs {
        let n = if matches!(spec, DatasetSpec::Synthetic(_)) { cfg.replicates } else { 1 };
        for r in 0..n {
            stats.push(load_replicate(cfg, spec, r)?.stats());
        }
    }
    create_dir(&cfg.output_dir)?;
    let path = out_path(cfg, "stats.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(DatasetStats::HEADER)?;
    for s in &stats {
        w.write_record(s.cells())?;
    }
    w.flush().map_err(|e| Error::io(&path, e))?;
    Ok((stats, path))
}

/// Formats stats as an aligned text table.
pub fn format_stats(stats: &[DatasetStats]) -> String {
    let mut rows: Vec<Vec<String>> = vec![DatasetStats::HEADER.iter().map(|s| s.to_string()).collect()];
    rows.extend(stats.iter().map(|s| s.cells().to_vec()));
    let widths: Vec<usize> = (0..rows[0].len()).map(|c| rows.iter().map(|r| r[c].len()).max().unwrap_or(0)).collect();
    rows.iter()
        .map(|r| r.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect::<Vec<_>>().join("  ").trim_end().to_owned() + "\n")
        .collect()
}

#[derive(Debug, Clone)]
pub struct FitRequest {
    pub arm: ModelArm,
    /// Fixed community count (PGM only); otherwise the grid is searched.
    pub k: Option<usize>,
    pub gamma: Option<f64>,
    pub fold: usize,
    pub replicate: usize,
}

/// Everything needed to reproduce and interpret a single fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitRecord {
    pub spec: ModelSpec,
    pub dataset: String,
    pub replicate: usize,
    pub fold: usize,
    pub data_seed: Option<u64>,
    pub split_seed: u64,
    pub fold_seed: u64,
    pub val_auc: Option<f64>,
    pub test_auc: f64,
    pub n_parameters: usize,
    pub n_clusters: usize,
}

/// Fits one model on one fold and saves it to `<output>/fit`: PGM
/// parameters (`U.csv`, `V.csv`, `W.csv`, `Beta.csv`) or a GNN checkpoint
/// plus `embeddings.csv`, with `nodes.txt` and `fit.json`.
pub fn cmd_fit(cfg: &ExperimentConfig, req: &FitRequest) -> Result<(FitRecord, PathBuf)> {
    cfg.validate()?;
    let ds = load_replicate(cfg, &cfg.dataset, req.replicate)?;
    if !arm_available(req.arm, &ds) {
        return Err(Error::InvalidArgument(format!("{} needs attribute data the dataset lacks", req.arm.label())));
    }
    let splits = splits_for(cfg, &ds, req.replicate)?;
    let split = splits
        .get(req.fold)
        .ok_or_else(|| Error::InvalidArgument(format!("fold {} out of range (n_folds = {})", req.fold, splits.len())))?;
    let data = ds.eval_data(cfg.n_clusters);
    let seed = model_seed(cfg, req.replicate);

    let mut candidates = arm_candidates(cfg, req.arm, seed);
    if let Some(k) = req.k.filter(|_| !req.arm.family.is_gnn()) {
        let mut spec = candidates.remove(0);
        if let Hyperparameters::Pgm(h) = &mut spec.hyperparameters {
            h.fit.k = k;
            if let Some(gamma) = req.gamma {
                h.gamma = gamma;
            }
        }
        candidates = vec![spec];
    }
    let spec = if candidates.len() == 1 {
        candidates.remove(0)
    } else {
        with_jobs(cfg, || grid_search(&candidates, &data, &splits))?.best
    };

    let dir = out_path(cfg, "fit");
    create_dir(&dir)?;
    let fseed = fold_seed(&spec, split);
    let (val_auc, test_auc, n_parameters) = match &spec.hyperparameters {
        Hyperparameters::Pgm(h) => {
            let fit_cfg = PgmFitConfig { seed: fseed, ..h.fit.clone() };
            let (params, beta, trace) = if spec.family == Family::Mt {
                let (p, t) = pgm::mt_fit(&ds.graph, split, &fit_cfg)?;
                (p, None, t)
            } else {
                let labels = mtcov_attribute(spec.feature_policy, &data, split, fseed)?;
                let (fit, t) = pgm::mtcov_fit(&ds.graph, split, &labels, labels.n_classes(), h.gamma, &fit_cfg)?;
                (fit.params, Some(fit.beta), t)
            };
            let meta = PgmMetadata {
                family: spec.family.name().into(),
                k: fit_cfg.k,
                gamma: (spec.family == Family::Mtcov).then_some(h.gamma),
                seed: fseed,
                iterations: trace.iterations,
                objective: trace.objective,
                config: fit_cfg.clone(),
            };
            pgm::write_params(&dir, &params, beta.as_ref(), &meta)?;
            let (v, t) = score_fold(split, |_, d| pgm::score_dyads(&params, d))?;
            let k = fit_cfg.k;
            let n = ds.graph.n_nodes();
            (v, t, 2 * n * k + k * k + beta.map_or(0, |b| b.len()))
        }
        Hyperparameters::Gnn(c) => {
            let gcfg = GnnConfig { seed: fseed, ..c.clone() };
            let feats = gnn_features(spec.feature_policy, &data, split, fseed)?;
            let (model, report) = gnn::train(&ds.graph, split, &feats, &gcfg)?;
            gnn::write_checkpoint(dir.join("model"), &model, &gcfg, Some(&report))?;
            let emb = gnn::embed(&model, &ds.graph, split, &feats, Phase::Train);
            write_matrix_csv(dir.join("embeddings.csv"), emb.z.view())?;
            let (v, t) = score_fold(split, |phase, d| {
                gnn::score_dyads(&gnn::embed(&model, &ds.graph, split, &feats, phase), d)
            })?;
            (v, t, model.n_parameters())
        }
    };
    write_lines(&dir.join("nodes.txt"), ds.ids.ids().iter().cloned())?;
    let record = FitRecord {
        spec,
        dataset: ds.name.clone(),
        replicate: req.replicate,
        fold: req.fold,
        data_seed: ds.data_seed,
        split_seed: split.seed,
        fold_seed: fseed,
        val_auc,
        test_auc,
        n_parameters,
        n_clusters: data.n_clusters,
    };
    write_json(dir.join("fit.json"), &record)?;
    Ok((record, dir))
}

#[derive(Debug, Clone)]
pub struct ExportRequest {
    pub fit_dir: PathBuf,
    /// K-means clusters for GNN embeddings; defaults to the fit's n_clusters.
    pub k: Option<usize>,
    /// Rescale PGM membership rows to sum to 1.
    pub normalize: bool,
    pub output: PathBuf,
}

/// Hard partition of a saved fit: argmax of U for PGMs, K-means of the
/// embeddings for GNNs. Rows are ordered by community, then node index;
/// columns are `node_id, community` followed by the membership or
/// embedding vector.
pub fn cmd_export_partitions(req: &ExportRequest) -> Result<PathBuf> {
    let record_path = req.fit_dir.join("fit.json");
    let text = fs::read_to_string(&record_path).map_err(|e| Error::io(&record_path, e))?;
    let record: FitRecord = serde_json::from_str(&text)?;
    let nodes_path = req.fit_dir.join("nodes.txt");
    let nodes: Vec<String> = fs::read_to_string(&nodes_path)
        .map_err(|e| Error::io(&nodes_path, e))?
        .lines()
        .map(str::to_owned)
        .collect();

    let (labels, vectors, prefix) = if record.spec.family.is_gnn() {
        let z = read_matrix_csv(req.fit_dir.join("embeddings.csv"))?;
        let k = req.k.unwrap_or(record.n_clusters);
        let labels = kmeans(z.view(), k, record.fold_seed).assignments;
        (labels, z, "z")
    } else {
        let (params, _) = pgm::read_params(&req.fit_dir)?;
        let labels = hard_memberships(&params);
        let u = if req.normalize { normalize_rows(&params.u) } else { params.u };
        (labels, u, "u")
    };
    if nodes.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!("{} node ids for {} rows", nodes.len(), labels.len())));
    }
    write_partition(&req.output, &nodes, &labels, &vectors, prefix)?;
    Ok(req.output.clone())
}

fn normalize_rows(m: &Array2<f64>) -> Array2<f64> {
    let mut out = m.clone();
    for mut row in out.rows_mut() {
        let s = row.sum();
        if s > 0.0 {
            row.mapv_inplace(|x| x / s);
        }
    }
    out
}

fn write_partition(path: &Path, nodes: &[String], labels: &NodeLabels, vectors: &Array2<f64>, prefix: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by_key(|&i| (labels.0[i], i));
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["node_id".to_owned(), "community".to_owned()];
    header.extend((0..vectors.ncols()).map(|c| format!("{prefix}_{c}")));
    w.write_record(&header)?;
    for i in order {
        let mut rec = vec![nodes[i].clone(), labels.0[i].to_string()];
        rec.extend(vectors.row(i).iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Reads a partition CSV back into labels indexed like `ids`.
pub fn read_partition(path: impl AsRef<Path>, ids: &IdMap) -> Result<NodeLabels> {
    let path = path.as_ref();
    let mut reader = csv::Reader::from_path(path)?;
    let mut found: HashMap<usize, usize> = HashMap::new();
    for (line, rec) in reader.records().enumerate() {
        let rec = rec?;
        let parse_err = |message: String| Error::Parse { path: path.to_owned(), line: line + 2, message };
        let node = ids.get(&rec[0]).ok_or_else(|| parse_err(format!("unknown node {:?}", &rec[0])))?;
        let c = rec[1].parse().map_err(|_| parse_err(format!("bad community {:?}", &rec[1])))?;
        found.insert(node, c);
    }
    (0..ids.len())
        .map(|i| found.get(&i).copied().ok_or_else(|| Error::InvalidArgument(format!("node {} missing", ids.external(i)))))
        .collect::<Result<Vec<_>>>()
        .map(NodeLabels)
}

/// Loads fitted PGM parameters from a `fit` directory.
pub fn load_pgm_fit(dir: impl AsRef<Path>) -> Result<PgmParams> {
    Ok(pgm::read_params(dir)?.0)
}
