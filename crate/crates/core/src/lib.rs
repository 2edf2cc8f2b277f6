//! Success-rate estimation for sequential agent tasks.
//!
//! The crate models an agent attempting a multi-step task as a synthetic
//! process whose true solve rate can be computed exactly, then measures how
//! four estimators behave against that ground truth:
//!
//! - **end-to-end**: plain Monte Carlo over full rollouts;
//! - **milestone**: product of per-stage conditional rates, each stage
//!   resampled from successful prefixes of the previous one;
//! - **expert best-of-N**: product of `1 / (i (i + 1))` over the ranks an
//!   expert picks among ranked completions;
//! - **corrected importance sampling**: the same rollouts reweighted by the
//!   productive fraction of each step's completions.
//!
//! [`harness`] runs replications of these estimators and summarises bias,
//! variance and interval coverage. [`fixture`] and [`report`] handle the CSV
//! and JSON surfaces used by the command-line tool.

pub mod error;
pub mod estimators;
pub mod fixture;
pub mod harness;
pub mod report;
pub mod seed;
pub mod stats;
pub mod task_model;

pub use error::{Error, Result};
pub use estimators::{
    bon_bits, corrected_is_estimate, end_to_end_estimate, expert_bon_estimate,
    milestone_estimate, BetaPrior, BoNRolloutRecord, EstimateReport, EstimatorConfig,
    IntervalConfig, Method,
};
pub use fixture::{ingest_paper_table, PaperResultsRow};
pub use harness::{
    bon_bias_experiment, calibration_experiment, run_replications, trivial_step_experiment,
    variance_comparison_experiment, BonBiasTable, CalibrationTable, ReplicationSummary,
    SampleBudgets, SuiteConfig, TrivialStepReport,
};
pub use stats::VarianceBreakdown;
pub use task_model::{
    exact_solve_rate, grade, simulate_bon_rollout, simulate_from_prefix, simulate_rollout,
    BoNTaskSpec, ChainTaskSpec, GradingRegime, GraphTaskSpec, MilestoneTask, OrderPolicy,
    TaskSpec, Trajectory,
};
