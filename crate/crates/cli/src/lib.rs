//! Batch harness around `tomochaos-core`: configuration, seeded orchestration
//! and bit-stable CSV/JSON output.

pub mod config;
pub mod output;
pub mod run;

pub use config::{load_config, ConfigError, ExperimentConfig, ObservableKind, Subcommand};
pub use run::{run, RunError, RunOutcome};

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const IO: i32 = 1;
    pub const CONFIG: i32 = 2;
    pub const NUMERICAL: i32 = 3;
}
