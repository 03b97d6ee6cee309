//! Fit MULTITENSOR on one fold and score the held-out dyads.

use netlinkbench::eval::auc;
use netlinkbench::graph::split_edges;
use netlinkbench::pgm::{hard_memberships, mt_fit, score_dyads, PgmFitConfig};
use netlinkbench::synth::{generate, gt_scalar_feature, Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let (g, gt) = generate(&SynthConfig::new(100, 5, 20.0, Structure::Assortative, 1))?;
    let split = split_edges(&g, 5, 0.1, 1)?.remove(0);
    let (params, trace) = mt_fit(&g, &split, &PgmFitConfig::new(5, 3))?;
    println!(
        "restart {} converged={} after {} iterations, log-likelihood {:.3}",
        trace.restart, trace.converged, trace.iterations, trace.objective
    );
    let test = auc(&score_dyads(&params, &split.test_pos), &score_dyads(&params, &split.test_neg))?;
    println!("test AUC {test:.4}");

    let found = hard_memberships(&params);
    let truth = gt_scalar_feature(&gt);
    println!("first 15 nodes, fitted vs planted community:");
    println!("  {:?}\n  {:?}", &found.0[..15], &truth.0[..15]);
    Ok(())
}
