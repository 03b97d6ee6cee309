//! Orchestration behind the command-line tool: configs, datasets, result
//! tables and one driver per subcommand.

mod commands;
mod config;
mod dataset;
mod results;

pub use commands::*;
pub use config::{DatasetSpec, ExperimentConfig, GnnSettings, ModelArm, PgmSettings, SyntheticFeatures};
pub use dataset::{Dataset, DatasetStats};
pub use results::{read_results, write_json, ResultRow, ResultWriter, RowContext, Status};
