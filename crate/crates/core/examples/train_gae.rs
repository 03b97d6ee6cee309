//! Train a GAE and a VGAE with structure features and save a checkpoint.

use netlinkbench::eval::score_fold;
use netlinkbench::gnn::{embed, score_dyads, train, write_checkpoint, GnnConfig, PhaseFeatures};
use netlinkbench::graph::split_edges;
use netlinkbench::synth::{generate, Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let (g, _) = generate(&SynthConfig::new(100, 5, 20.0, Structure::Assortative, 3))?;
    let split = split_edges(&g, 5, 0.1, 3)?.remove(0);
    let feats = PhaseFeatures::structure(&g, &split);
    for variational in [false, true] {
        let cfg = GnnConfig { weight_decay: 1e-4, ..GnnConfig::new(32, 1, variational, 5) };
        let (model, report) = train(&g, &split, &feats, &cfg)?;
        let (val, test) = score_fold(&split, |phase, dyads| score_dyads(&embed(&model, &g, &split, &feats, phase), dyads))?;
        println!(
            "{}: best epoch {} (val loss {:.4}), val AUC {:.4}, test AUC {test:.4}",
            if variational { "VGAE" } else { "GAE" },
            report.best_epoch,
            report.best_val_loss,
            val.unwrap_or(f64::NAN)
        );
        if !variational {
            let dir = std::env::temp_dir().join("netlinkbench-gae-checkpoint");
            write_checkpoint(&dir, &model, &cfg, Some(&report))?;
            println!("checkpoint in {}", dir.display());
        }
    }
    Ok(())
}
