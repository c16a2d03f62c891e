//! Configuration files, run manifests, experiment dispatch and replay.

mod config;
mod manifest;
mod operators;
mod plot;
mod run;

pub use config::{parse_config, ConfigDocument, ExperimentConfig, ExperimentKind};
pub use manifest::{RunManifest, RunStatus, MANIFEST_FILE};
pub use operators::{operator_convergence, OperatorRow, OperatorTable, OPERATOR_TABLE_NODES_PER_DECADE};
pub use plot::{emit_plot_data, PlotSeries};
pub use run::{
    output_dir, replay, replay_run, run_experiment, run_experiment_in, ReplayOutcome, CONFIG_FILE, FINAL_FILE, LOG_FILE, OUT_DIR_ENV,
};
