//! Five-fold cross-validated AUC for one model per family.

use netlinkbench::eval::{evaluate, EvalData, FeaturePolicy, ModelSpec};
use netlinkbench::features::{FeatureKind, FeatureMatrix};
use netlinkbench::gnn::GnnConfig;
use netlinkbench::graph::split_edges;
use netlinkbench::synth::{generate, gt_scalar_feature, Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let (g, gt) = generate(&SynthConfig::new(100, 5, 20.0, Structure::Assortative, 4))?;
    let features = FeatureMatrix::new(gt.u.clone(), FeatureKind::Attribute);
    let attribute = gt_scalar_feature(&gt);
    let data = EvalData { graph: &g, features: Some(&features), scalar_attribute: Some(&attribute), n_clusters: 5 };
    let splits = split_edges(&g, 5, 0.1, 4)?;

    let specs = [
        ModelSpec::mt(5, 1),
        ModelSpec::mtcov(5, 0.5, FeaturePolicy::Attribute, 1),
        ModelSpec::gnn(GnnConfig::new(32, 1, false, 1), FeaturePolicy::Structure),
        ModelSpec::gnn(GnnConfig::new(32, 1, false, 1), FeaturePolicy::Attribute),
        ModelSpec::gnn(GnnConfig::new(32, 1, true, 1), FeaturePolicy::Clustered),
    ];
    for spec in &specs {
        let report = evaluate(spec, &data, &splits)?;
        println!(
            "{:>6} / {:<10} AUC {:.4} ± {:.4}  per fold {:?}",
            spec.family.name(),
            spec.feature_policy.name(),
            report.mean,
            report.std,
            report.per_fold.iter().map(|a| (a * 1000.0).round() / 1000.0).collect::<Vec<_>>()
        );
    }
    Ok(())
}
