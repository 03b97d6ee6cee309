//! Choose K for MULTITENSOR by validation AUC.

use netlinkbench::eval::{grid_search, EvalData, Family, FeaturePolicy, PgmGrid};
use netlinkbench::graph::split_edges;
use netlinkbench::pgm::PgmFitConfig;
use netlinkbench::synth::{generate, Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let (g, _) = generate(&SynthConfig::new(100, 5, 20.0, Structure::Assortative, 5))?;
    let splits = split_edges(&g, 5, 0.1, 5)?;
    let grid = PgmGrid { k: (2..=8).collect(), gamma: vec![0.0] };
    let candidates = grid.expand(Family::Mt, FeaturePolicy::None, &PgmFitConfig::new(1, 9));
    let result = grid_search(&candidates, &EvalData::structure_only(&g, 5), &splits)?;
    println!("  K  val AUC  test AUC  params");
    for (spec, c) in candidates.iter().zip(&result.candidates) {
        let k = match &spec.hyperparameters {
            netlinkbench::eval::Hyperparameters::Pgm(h) => h.fit.k,
            _ => unreachable!(),
        };
        println!("{k:>3}  {:.4}   {:.4}    {}", c.mean_val_auc, c.report.mean, c.n_parameters);
    }
    println!("selected candidate {} with test AUC {:.4}", result.best_index, result.report.mean);
    Ok(())
}
