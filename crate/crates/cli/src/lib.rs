//! Experiment runner for `hredq-core`: flat-file configuration with named
//! presets, the seeded training loop, run artifacts (`config.txt`,
//! `metadata.json`, `metrics.csv`, `checkpoint.bin`) and cross-run
//! aggregation.

pub mod aggregate;
pub mod checkpoint;
pub mod config;
pub mod records;
pub mod run;

pub use config::{
    load_config, preset, preset_names, ConfigSources, ExperimentConfig, Family, RunPaths,
};
pub use run::{train, RunOutcome};
