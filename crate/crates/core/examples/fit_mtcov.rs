//! MTCOV: the network plus a categorical node attribute, across gamma.

use netlinkbench::eval::auc;
use netlinkbench::graph::split_edges;
use netlinkbench::pgm::{mtcov_fit, score_dyads, PgmFitConfig};
use netlinkbench::synth::{generate, gt_scalar_feature, Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let (g, gt) = generate(&SynthConfig::new(100, 5, 20.0, Structure::Assortative, 2))?;
    let attribute = gt_scalar_feature(&gt);
    let split = split_edges(&g, 5, 0.1, 2)?.remove(0);
    let cfg = PgmFitConfig::new(5, 4);
    for gamma in [0.0, 0.1, 0.5, 0.9] {
        let (fit, trace) = mtcov_fit(&g, &split, &attribute, 5, gamma, &cfg)?;
        let test = auc(&score_dyads(&fit.params, &split.test_pos), &score_dyads(&fit.params, &split.test_neg))?;
        println!("gamma={gamma:.1}: objective {:>10.3}, test AUC {test:.4}", trace.objective);
    }
    Ok(())
}
