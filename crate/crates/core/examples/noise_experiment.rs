//! Feature-noise experiment through the bench driver, on a small budget.

use netlinkbench::bench::{cmd_experiment_noise, DatasetSpec, ExperimentConfig, GnnSettings};
use netlinkbench::eval::{GnnGrid, PgmGrid};
use netlinkbench::synth::{Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let cfg = ExperimentConfig {
        seed: 3,
        n_folds: 3,
        output_dir: std::env::temp_dir().join("netlinkbench-noise-example"),
        dataset: DatasetSpec::Synthetic(SynthConfig::new(80, 4, 12.0, Structure::Assortative, 0)),
        models: vec!["mtcov:attribute".parse()?, "gae:attribute".parse()?],
        pgm_grid: PgmGrid { k: vec![4], gamma: vec![0.5] },
        gnn_grid: GnnGrid {
            learning_rate: vec![0.01],
            weight_decay: vec![1e-4],
            dropout: vec![0.0],
            hidden_dim: vec![16],
            n_layers: vec![1],
        },
        gnn: GnnSettings { epochs: 100, ..GnnSettings::default() },
        rho: vec![0.5, 1.0],
        ..ExperimentConfig::default()
    };
    let out = cmd_experiment_noise(&cfg)?;
    for row in out.rows.iter().filter(|r| r.metric == "delta_auc_mean") {
        println!("{:>6} rho={:.1}  mean dAUC {:+.4}", row.model, row.rho.unwrap_or(0.0), row.value);
    }
    println!("results in {}", cfg.output_dir.display());
    Ok(())
}
