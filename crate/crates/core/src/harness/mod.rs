//! Seeded experiment runner.
//!
//! An [`ExperimentConfig`] names a scenario, a list of policies and a number
//! of replications. Replication `i` uses seed `base + i`; within a
//! replication every policy faces the same action sets and noise draws.

mod config;
mod output;
mod run;

pub use config::{ExperimentConfig, Options, PolicyKind, PolicySpec, ResolvedPolicy};
pub use output::{emit_results, read_regret_csv, RegretRow};
pub use run::{
    environment_rng, nearest_rank, run_episode, run_episode_with_rng, run_replications,
    scenario_rng, threads_from_env, AggregateResult, Experiment, FinalSummary, PolicyAggregate,
    RegretTrace, ThetaSnapshot, THREADS_ENV,
};
