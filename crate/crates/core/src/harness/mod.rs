//! Experiment driver: configuration, the slot loop tying population,
//! channel, agents and baselines together, and metric output.

mod config;
mod metrics;
mod run;

pub use config::{load_config, Baseline, ExperimentConfig, Scenario};
pub use metrics::{
    emit_metrics, read_metrics, slots_csv, summary_csv, users_csv, MetricsLog, RunSummary, SlotRow,
    SlotStats, UserRow,
};
pub use run::{build_population, radio_params, run_experiment};
