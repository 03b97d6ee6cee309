//! Sample an assortative and a disassortative network and compare them.

use netlinkbench::graph::{average_degree, edge_homophily};
use netlinkbench::synth::{generate, gt_scalar_feature, Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    for structure in [Structure::Assortative, Structure::Disassortative] {
        // undirected, so V = U and the argmax labels describe both endpoints
        let cfg = SynthConfig { directed: false, ..SynthConfig::new(200, 4, 10.0, structure, 7) };
        let (g, gt) = generate(&cfg)?;
        let h = edge_homophily(&g, &gt_scalar_feature(&gt))?;
        println!(
            "{structure:>14}: N={} edges={} <k>={:.2} h={h:.3} density scale={:.4}",
            g.n_nodes(),
            g.canonical_edges().len(),
            average_degree(&g),
            gt.density_scale
        );
    }
    Ok(())
}
