//! K-means compresses a feature matrix into one categorical column.

use netlinkbench::features::{clustered_feature, kmeans, FeatureKind, FeatureMatrix};
use netlinkbench::synth::{generate, gt_scalar_feature, Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let (_, gt) = generate(&SynthConfig::new(300, 4, 10.0, Structure::Assortative, 6))?;
    let x = FeatureMatrix::new(gt.u.clone(), FeatureKind::Attribute);
    let result = kmeans(x.values.view(), 4, 1);
    println!("inertia {:.3}", result.inertia);

    // agreement with the planted argmax, up to relabelling
    let truth = gt_scalar_feature(&gt);
    let mut table = [[0usize; 4]; 4];
    for (&c, &t) in result.assignments.0.iter().zip(&truth.0) {
        table[c][t] += 1;
    }
    for (c, row) in table.iter().enumerate() {
        println!("cluster {c}: planted counts {row:?}");
    }
    let column = clustered_feature(&x, 4, 1);
    println!("clustered feature: {}x{} ({:?})", column.n_nodes(), column.n_features(), column.kind);
    Ok(())
}
