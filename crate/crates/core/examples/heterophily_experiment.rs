//! MT and GAE on an assortative/disassortative pair.

use netlinkbench::bench::{cmd_experiment_heterophily, DatasetSpec, ExperimentConfig};
use netlinkbench::eval::{GnnGrid, PgmGrid};
use netlinkbench::synth::{Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let cfg = ExperimentConfig {
        n_folds: 3,
        output_dir: std::env::temp_dir().join("netlinkbench-heterophily-example"),
        dataset: DatasetSpec::Synthetic(SynthConfig::new(100, 5, 20.0, Structure::Assortative, 0)),
        models: vec!["mt".parse()?, "gae:structure".parse()?, "gae:clustered".parse()?],
        pgm_grid: PgmGrid { k: vec![5], gamma: vec![0.5] },
        gnn_grid: GnnGrid {
            learning_rate: vec![0.01],
            weight_decay: vec![1e-4],
            dropout: vec![0.0],
            hidden_dim: vec![32],
            n_layers: vec![1],
        },
        ..ExperimentConfig::default()
    };
    let out = cmd_experiment_heterophily(&cfg)?;
    for row in out.rows.iter().filter(|r| r.metric == "test_auc_mean") {
        println!(
            "{:<36} h={:.3}  {:>4}/{:<10} AUC {:.4}",
            row.dataset,
            row.homophily.unwrap_or(f64::NAN),
            row.model,
            row.feature_policy,
            row.value
        );
    }
    Ok(())
}
