//! Experiments, metrics, configuration and persistence.
//!
//! Every run writes into one output directory: `manifest.txt` (resolved
//! configuration plus checksums), `series.csv`, and snapshot files named
//! `snap_<clock>_<time>_<field>.{raw,pgm,pgm.scale}` where `clock` is `T`
//! (slow) or `t` (fast).

pub mod config;
pub mod experiments;
pub mod io;
pub mod manifest;
pub mod metrics;

pub use config::{Experiment, RunConfig};
pub use experiments::{
    decomposition_study, ou_variance_study, replay, resolve_fast_step, run_compare, run_experiment, CompareReport,
    CompareRow, DecompositionConfig, OuStatRow, ReplayReport,
};
pub use manifest::{RunManifest, Status};
pub use metrics::{approximation_error, dominant_x_wavenumber, energy_diagnostics, EnergyDiagnostics};
