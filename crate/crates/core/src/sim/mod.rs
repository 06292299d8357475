//! Deterministic Monte Carlo engine and the experiment presets.
//!
//! Trials are independent work items on a rayon pool. Each trial draws from
//! its own ChaCha8 stream keyed by the seed and the grid coordinates, and
//! results are gathered in trial order before any reduction, so every output
//! is bit-identical for any worker count.

mod config;
mod engine;
mod experiments;
mod output;

pub use config::{ExperimentConfig, LSpec, Preset, Scheme, ZetaSpec};
pub use engine::{
    run_mono_dual_trial, run_trial, run_trial_on, run_trials, MonoDualRates, MonoSetup, StreamKeys, TrialMetrics,
    TrialSetup, RATIO_SLACK,
};
pub use experiments::{
    cdf_check, compare_mono_dual, default_l_grid, gain_bound_mean, plan_for, run_experiment, sweep, table1, CdfCheck,
    RunSummary, SweepCounters,
};
pub use output::{write_manifest, LongTable, Row};
