//! Experiment driver: configuration, the iterated-batch loop over seeds,
//! persistence, and aggregation of finished runs.

mod compare;
mod config;
mod persist;
mod run;

pub use compare::{compare, explore, load_run, Comparison, LoadedRun, LoadedSeed, MethodSummary};
pub use config::{ExperimentConfig, Profile};
pub use persist::{
    read_trace, write_coverage, write_json, write_reward_bins, COMPARISON_FILE, CONFIG_FILE, COVERAGE_FILE,
    EPOCHS_FILE, METRICS_FILE, PLANNING_FILE, REWARD_BINS_FILE, STATUS_FILE, TIMINGS_FILE, TRACE_FILE,
};
pub use run::{
    run_episode_random, run_experiment, run_seed, seed_dir, ExperimentOutcome, ExperimentSummary, RunRecord,
    SeedStatus, Timings,
};
