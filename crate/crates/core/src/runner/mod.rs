//! Experiment configs, the scenario presets, and persisted records.

mod config;
mod record;
mod scenarios;

pub use config::{ExperimentConfig, ObservableSpec, Params, Plan};
pub use record::{run, run_to_dir, verify, ExperimentRecord, Table, VerifyReport, SCHEMA_VERSION};
pub use scenarios::{list_scenarios, Scenario, ScenarioInfo};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "SEQDYN_OUT_DIR";

/// Output directory used when neither `--out` nor [`OUT_DIR_ENV`] is set.
pub const DEFAULT_OUT_DIR: &str = "seqdyn-out";
