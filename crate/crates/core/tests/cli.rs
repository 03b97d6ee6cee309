use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TINY: &str = r#"{
  "dataset": {"kind": "synthetic", "n_nodes": 40, "n_communities": 3, "target_avg_degree": 8, "structure": "assortative"},
  "n_folds": 3,
  "pgm_grid": {"k": [2, 3], "gamma": [0.5]},
  "pgm": {"max_iter": 60, "rel_tol": 1e-6, "n_restarts": 2, "epsilon": 1e-12},
  "gnn_grid": {"learning_rate": [0.01], "weight_decay": [0.0], "dropout": [0.0], "hidden_dim": [8], "n_layers": [1]},
  "gnn": {"epochs": 20, "patience": 10, "resample_negatives": false},
  "rho": [0.0, 1.0]
}"#;

fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    fs::write(dir.path().join("config.json"), TINY).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str], env_seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_netlinkbench"));
    cmd.current_dir(dir).arg("--config").arg("config.json").args(args).env("RUST_LOG", "warn");
    match env_seed {
        Some(s) => cmd.env("NETLINKBENCH_SEED", s),
        None => cmd.env_remove("NETLINKBENCH_SEED"),
    };
    cmd.output().unwrap()
}

fn manifest_seed(path: &Path) -> u64 {
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap();
    v["config"]["seed"].as_u64().unwrap()
}

#[test]
fn generate_honours_seed_sources() {
    let dir = setup();
    assert!(run(dir.path(), &["--output", "a", "generate", "--replicates", "2"], None).status.success());
    assert_eq!(manifest_seed(&dir.path().join("a/manifest.json")), 0);
    assert!(dir.path().join("a/replicate_01/edges.tsv").exists());

    assert!(run(dir.path(), &["--output", "b", "generate"], Some("77")).status.success());
    assert_eq!(manifest_seed(&dir.path().join("b/manifest.json")), 77);

    // an explicit flag beats the environment
    assert!(run(dir.path(), &["--output", "c", "--seed", "5", "generate"], Some("77")).status.success());
    assert_eq!(manifest_seed(&dir.path().join("c/manifest.json")), 5);
}

#[test]
fn stats_prints_a_table_and_writes_csv() {
    let dir = setup();
    fs::write(dir.path().join("edges.txt"), "1 2\n2 3\n3 1\n").unwrap();
    let out = run(dir.path(), &["--output", "s", "stats", "--edges", "edges.txt"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let stdout = String::from_utf8(out.stdout).unwrap();
    assert!(stdout.starts_with("dataset"));
    let csv = fs::read_to_string(dir.path().join("s/stats.csv")).unwrap();
    assert_eq!(csv.lines().nth(1).unwrap(), "edges,false,3,3,2.0000,-,-");
}

#[test]
fn evaluate_and_experiments_write_results() {
    let dir = setup();
    let out = run(dir.path(), &["--output", "r", "evaluate", "--model", "mt", "--model", "gae:structure"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("r/evaluate_results.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * (3 + 2));
    assert!(dir.path().join("r/evaluate_summary.json").exists());

    let out = run(dir.path(), &["--output", "r", "experiment", "noise"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("r/noise_manifests/replicate_00/rho_1.json").exists());
}

#[test]
fn failed_folds_give_nonzero_exit_and_failed_rows() {
    let dir = setup();
    let bad = TINY.replace(r#""dropout": [0.0]"#, r#""dropout": [2.0]"#);
    fs::write(dir.path().join("config.json"), bad).unwrap();
    let out = run(dir.path(), &["--output", "f", "evaluate", "--model", "mt", "--model", "gae:structure"], None);
    assert!(!out.status.success());
    let csv = fs::read_to_string(dir.path().join("f/evaluate_results.csv")).unwrap();
    assert!(csv.contains(",FAILED,"));
    assert!(csv.lines().any(|l| l.contains(",mt,") && l.ends_with(",OK,")));
}

#[test]
fn fit_then_export_partitions() {
    let dir = setup();
    let out = run(dir.path(), &["--output", "o", "fit", "--model", "mt", "--k", "3"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["spec"]["family"], "mt");
    let out = run(dir.path(), &["--output", "o", "export-partitions", "--fit-dir", "o/fit", "--normalize"], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("o/partitions.csv")).unwrap();
    assert!(csv.starts_with("node_id,community,u_0,u_1,u_2"));
    assert_eq!(csv.lines().count(), 41);
}

#[test]
fn bad_arguments_are_rejected() {
    let dir = setup();
    assert!(!run(dir.path(), &["fit", "--model", "gae"], None).status.success());
    let missing = Command::new(env!("CARGO_BIN_EXE_netlinkbench"))
        .current_dir(dir.path())
        .args(["--config", "missing.json", "generate"])
        .output()
        .unwrap();
    assert!(!missing.status.success());
}
