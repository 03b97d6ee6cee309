//! Fit, then export hard communities ordered by community.

use netlinkbench::bench::{cmd_export_partitions, cmd_fit, DatasetSpec, ExperimentConfig, ExportRequest, FitRequest};
use netlinkbench::synth::{Structure, SynthConfig};

fn main() -> netlinkbench::Result<()> {
    let out = std::env::temp_dir().join("netlinkbench-partition-example");
    let cfg = ExperimentConfig {
        output_dir: out.clone(),
        dataset: DatasetSpec::Synthetic(SynthConfig::new(60, 3, 10.0, Structure::Assortative, 0)),
        ..ExperimentConfig::default()
    };
    for (arm, k) in [("mt", Some(3)), ("gae:structure", None)] {
        let (record, fit_dir) = cmd_fit(&cfg, &FitRequest { arm: arm.parse()?, k, gamma: None, fold: 0, replicate: 0 })?;
        let output = out.join(format!("{}_partition.csv", record.spec.family.name()));
        cmd_export_partitions(&ExportRequest { fit_dir, k: Some(3), normalize: true, output: output.clone() })?;
        println!("{arm}: test AUC {:.4}; partition written to {}", record.test_auc, output.display());
        let text = std::fs::read_to_string(&output).expect("partition");
        for line in text.lines().take(4) {
            println!("  {}", &line[..line.len().min(70)]);
        }
    }
    Ok(())
}
