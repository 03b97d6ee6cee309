use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use log::error;

use netlinkbench::bench::{
    cmd_evaluate, cmd_experiment_features, cmd_experiment_heterophily, cmd_experiment_noise, cmd_export_partitions,
    cmd_fit, cmd_generate, cmd_stats, format_stats, DatasetSpec, ExperimentConfig, ExportRequest, FitRequest,
    ModelArm, Outcome,
};
use netlinkbench::error::Result;

/// Link-prediction benchmark for mixed-membership SBMs and graph autoencoders.
#[derive(Parser)]
#[command(name = "netlinkbench", version)]
struct Cli {
    /// JSON experiment config; omitted fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Base seed (overrides the config).
    #[arg(long, global = true, env = "NETLINKBENCH_SEED")]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample synthetic networks with their planted parameters.
    Generate {
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Print and save N, edges, average degree, homophily and feature count.
    Stats {
        #[command(flatten)]
        data: DataArgs,
    },
    /// Fit one model on one fold and save its parameters.
    Fit {
        /// `family:policy`, e.g. `mt`, `mtcov:attribute`, `gae:structure`.
        #[arg(long, default_value = "mt")]
        model: ModelArm,
        /// Fixed number of communities (PGMs); otherwise the grid is searched.
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, default_value_t = 0)]
        fold: usize,
        #[arg(long, default_value_t = 0)]
        replicate: usize,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Cross-validated test AUC of the configured models.
    Evaluate {
        /// Model arms; repeatable. Defaults to the config's `models`.
        #[arg(long = "model")]
        models: Vec<ModelArm>,
        #[command(flatten)]
        data: DataArgs,
    },
    /// Run one of the comparison experiments.
    Experiment {
        #[command(subcommand)]
        which: Experiment,
    },
    /// Hard community assignment of a saved fit, nodes ordered by community.
    ExportPartitions {
        /// Directory written by `fit`.
        #[arg(long)]
        fit_dir: PathBuf,
        /// K-means clusters for GNN embeddings.
        #[arg(long)]
        k: Option<usize>,
        /// Rescale PGM membership rows to sum to one.
        #[arg(long)]
        normalize: bool,
        /// Output CSV (default: `<output>/partitions.csv`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Subcommand, Clone, Copy)]
enum Experiment {
    /// Structure vs attribute vs clustered features.
    Features,
    /// Feature randomization at the configured noise levels.
    Noise,
    /// Assortative vs disassortative networks.
    Heterophily,
}

/// Ad-hoc dataset overriding the config's `dataset`.
#[derive(Args, Clone, Default)]
struct DataArgs {
    /// Edge list (`src dst` per line).
    #[arg(long, conflicts_with = "planetoid")]
    edges: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    directed: bool,
    #[arg(long, requires = "edges")]
    labels: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    features: Option<PathBuf>,
    #[arg(long, requires = "edges")]
    attribute: Option<PathBuf>,
    /// Directory with `<name>.content` and `<name>.cites`.
    #[arg(long, requires = "name")]
    planetoid: Option<PathBuf>,
    /// Dataset name (Planetoid file stem, or a label for `--edges`).
    #[arg(long)]
    name: Option<String>,
}

impl DataArgs {
    fn apply(self, cfg: &mut ExperimentConfig) {
        if let Some(edges) = self.edges {
            cfg.dataset = DatasetSpec::Files {
                name: self.name,
                edges,
                directed: self.directed,
                labels: self.labels,
                features: self.features,
                attribute: self.attribute,
            };
        } else if let (Some(dir), Some(name)) = (self.planetoid, self.name) {
            cfg.dataset = DatasetSpec::Planetoid { dir, name };
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(jobs) = cli.jobs {
        cfg.jobs = jobs;
    }
    if let Some(output) = &cli.output {
        cfg.output_dir = output.clone();
    }
    Ok(cfg)
}

fn report(outcome: &Outcome) -> ExitCode {
    for f in &outcome.files {
        println!("{}", f.display());
    }
    if outcome.n_failed > 0 {
        error!("{} fit(s) failed; see FAILED rows", outcome.n_failed);
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}

fn run(cli: Cli) -> Result<ExitCode> {
    let mut cfg = load_config(&cli)?;
    match cli.command {
        Command::Generate { replicates } => {
            if let Some(r) = replicates {
                cfg.replicates = r;
            }
            Ok(report(&cmd_generate(&cfg)?))
        }
        Command::Stats { data } => {
            data.apply(&mut cfg);
            let (stats, path) = cmd_stats(&cfg)?;
            print!("{}", format_stats(&stats));
            eprintln!("wrote {}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Fit { model, k, gamma, fold, replicate, data } => {
            data.apply(&mut cfg);
            let (record, dir) = cmd_fit(&cfg, &FitRequest { arm: model, k, gamma, fold, replicate })?;
            println!("{}", serde_json::to_string_pretty(&record)?);
            eprintln!("wrote {}", dir.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Evaluate { models, data } => {
            data.apply(&mut cfg);
            if !models.is_empty() {
                cfg.models = models;
            }
            Ok(report(&cmd_evaluate(&cfg)?))
        }
        Command::Experiment { which } => {
            let outcome = match which {
                Experiment::Features => cmd_experiment_features(&cfg)?,
                Experiment::Noise => cmd_experiment_noise(&cfg)?,
                Experiment::Heterophily => cmd_experiment_heterophily(&cfg)?,
            };
            Ok(report(&outcome))
        }
        Command::ExportPartitions { fit_dir, k, normalize, out } => {
            let output = out.unwrap_or_else(|| cfg.output_dir.join("partitions.csv"));
            let path = cmd_export_partitions(&ExportRequest { fit_dir, k, normalize, output })?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            error!("{e}");
            ExitCode::FAILURE
        }
    }
}
