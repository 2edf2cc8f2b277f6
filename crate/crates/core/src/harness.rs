//! Replication experiments measuring estimator bias, variance and interval
//! coverage against exact solve rates.

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::estimators::{
    corrected_is_from_records, end_to_end_estimate, expert_bon_from_records, milestone_estimate,
    EstimateReport, EstimatorConfig, IntervalConfig, Method,
};
use crate::fixture::PaperResultsRow;
use crate::seed::{self, stream};
use crate::stats::{self, VarianceBreakdown};
use crate::task_model::{
    bon_rollouts, exact_solve_rate, BoNTaskSpec, ChainTaskSpec, GradingRegime, MilestoneTask,
    RawTask, TaskSpec,
};

/// Relative tolerance for empirical-vs-closed-form variance agreement.
pub const VARIANCE_AGREEMENT_TOLERANCE: f64 = 0.15;
/// Replications needed before agreement is judged.
pub const VARIANCE_AGREEMENT_MIN_REPLICATIONS: usize = 1000;

const DEFAULT_SUITE: &str = include_str!("../suites/default.toml");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SampleBudgets {
    /// Rollouts per end-to-end estimate.
    pub end_to_end: usize,
    /// Trials per milestone stage.
    pub per_milestone: usize,
    /// Rollouts per best-of-N estimate.
    pub rollouts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteConfig {
    pub tasks: Vec<TaskSpec>,
    pub budgets: SampleBudgets,
    pub replications: usize,
    pub master_seed: u64,
    pub regimes: Vec<GradingRegime>,
    pub methods: Vec<Method>,
    pub estimator: EstimatorConfig,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSuite {
    master_seed: u64,
    replications: usize,
    budgets: SampleBudgets,
    #[serde(default)]
    regimes: Option<Vec<GradingRegime>>,
    #[serde(default)]
    methods: Option<Vec<Method>>,
    #[serde(default)]
    interval_draws: Option<usize>,
    tasks: Vec<RawTask>,
}

impl SuiteConfig {
    pub fn new(tasks: Vec<TaskSpec>, budgets: SampleBudgets, replications: usize, master_seed: u64) -> Result<Self> {
        let suite = Self {
            tasks,
            budgets,
            replications,
            master_seed,
            regimes: GradingRegime::ALL.to_vec(),
            methods: Method::ALL.to_vec(),
            estimator: EstimatorConfig::default(),
        };
        suite.validate()?;
        Ok(suite)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidArgument(format!("suite: {what}")));
        if self.replications == 0 {
            return bad("replications must be at least 1");
        }
        let b = &self.budgets;
        if b.end_to_end == 0 || b.per_milestone == 0 || b.rollouts == 0 {
            return bad("sample budgets must be at least 1");
        }
        if self.tasks.is_empty() {
            return bad("no tasks");
        }
        if self.regimes.is_empty() {
            return bad("no grading regimes");
        }
        if self.methods.is_empty() {
            return bad("no methods");
        }
        Ok(())
    }

    pub fn from_toml_str(text: &str, origin: &Path) -> Result<Self> {
        let config_err = |reason: String| Error::Config {
            path: origin.to_path_buf(),
            reason,
        };
        let raw: RawSuite = toml::from_str(text).map_err(|e| config_err(e.to_string()))?;
        let tasks = raw
            .tasks
            .into_iter()
            .map(RawTask::into_spec)
            .collect::<Result<Vec<_>>>()?;
        let mut estimator = EstimatorConfig::default();
        if let Some(draws) = raw.interval_draws {
            estimator.interval = Some(IntervalConfig {
                draws,
                ..IntervalConfig::default()
            });
        }
        let suite = Self {
            tasks,
            budgets: raw.budgets,
            replications: raw.replications,
            master_seed: raw.master_seed,
            regimes: raw.regimes.unwrap_or_else(|| GradingRegime::ALL.to_vec()),
            methods: raw.methods.unwrap_or_else(|| Method::ALL.to_vec()),
            estimator,
        };
        suite.validate()?;
        Ok(suite)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        Self::from_toml_str(&text, path)
    }

    /// Ten milestone tasks with solve rates between 0.01 and 0.96, plus
    /// best-of-N tasks between 0.1 and 0.95.
    pub fn default_suite() -> Self {
        Self::from_toml_str(DEFAULT_SUITE, Path::new("<default suite>"))
            .expect("bundled default suite is valid")
    }

    fn seed_for(&self, task: usize, method: Method, replication: usize) -> u64 {
        seed::derive_path(
            self.master_seed,
            &[stream::REPLICATION, task as u64, method as u64, replication as u64],
        )
    }
}

/// Aggregate of `replications` independent estimates of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub task: String,
    pub method: Method,
    /// Grading regime of the truth; `None` for best-of-N tasks, whose truth
    /// is the agent's unassisted solve rate.
    pub regime: Option<GradingRegime>,
    pub replications: usize,
    /// Replications that produced no estimate (all best-of-N rollouts
    /// failed). They are counted here and left out of the moments.
    pub failed_replications: usize,
    pub mean_estimate: Option<f64>,
    pub empirical_variance: f64,
    pub oracle_truth: f64,
    pub bias: Option<f64>,
    /// Fraction of intervals containing the truth (bounds inclusive).
    pub ci_coverage: Option<f64>,
}

impl ReplicationSummary {
    pub fn from_reports(reports: &[EstimateReport], regime: Option<GradingRegime>, truth: f64) -> Self {
        let first = &reports[0];
        let points: Vec<f64> = reports.iter().filter_map(|r| r.point_estimate).collect();
        let (mean, variance) = if points.is_empty() {
            (None, 0.0)
        } else {
            let (m, v) = stats::mean_and_variance(&points);
            (Some(m), v)
        };
        let covered: Vec<bool> = reports.iter().filter_map(|r| r.covers(truth)).collect();
        let coverage = (!covered.is_empty())
            .then(|| covered.iter().filter(|&&c| c).count() as f64 / covered.len() as f64);
        Self {
            task: first.task.clone(),
            method: first.method,
            regime,
            replications: reports.len(),
            failed_replications: reports.len() - points.len(),
            mean_estimate: mean,
            empirical_variance: variance,
            oracle_truth: truth,
            bias: mean.map(|m| m - truth),
            ci_coverage: coverage,
        }
    }
}

fn replicate<F>(replications: usize, run: F) -> Result<Vec<EstimateReport>>
where
    F: Fn(usize) -> Result<EstimateReport> + Sync + Send,
{
    (0..replications).into_par_iter().map(run).collect()
}

fn milestone_replications<T: MilestoneTask + ?Sized>(
    suite: &SuiteConfig,
    index: usize,
    task: &T,
) -> Result<Vec<EstimateReport>> {
    replicate(suite.replications, |r| {
        milestone_estimate(
            task,
            suite.budgets.per_milestone,
            suite.seed_for(index, Method::Milestone, r),
            &suite.estimator,
        )
    })
}

fn bon_replications(suite: &SuiteConfig, index: usize, task: &BoNTaskSpec, method: Method) -> Result<Vec<EstimateReport>> {
    replicate(suite.replications, |r| {
        let seed = suite.seed_for(index, method, r);
        let records = bon_rollouts(task, suite.budgets.rollouts, seed);
        Ok(match method {
            Method::ExpertBon => expert_bon_from_records(task.name(), &records, seed),
            _ => corrected_is_from_records(task.name(), &records, seed),
        })
    })
}

/// Runs every applicable (task, method) pair `replications` times and
/// summarises each against the exact solve rate under each regime.
pub fn run_replications(suite: &SuiteConfig) -> Result<Vec<ReplicationSummary>> {
    suite.validate()?;
    let mut out = Vec::new();
    for (index, spec) in suite.tasks.iter().enumerate() {
        match spec {
            TaskSpec::Chain(_) | TaskSpec::Graph(_) => {
                let task = spec.as_milestone_task().expect("milestone task");
                let truths = suite
                    .regimes
                    .iter()
                    .map(|&regime| Ok((regime, exact_solve_rate(task, regime)?)))
                    .collect::<Result<Vec<_>>>()?;
                for &method in &suite.methods {
                    match method {
                        Method::EndToEnd => {
                            for &(regime, truth) in &truths {
                                let reports = replicate(suite.replications, |r| {
                                    end_to_end_estimate(
                                        task,
                                        regime,
                                        suite.budgets.end_to_end,
                                        suite.seed_for(index, method, r),
                                        &suite.estimator,
                                    )
                                })?;
                                out.push(ReplicationSummary::from_reports(&reports, Some(regime), truth));
                            }
                        }
                        Method::Milestone => {
                            // The estimate does not depend on grading; only the truth does.
                            let reports = milestone_replications(suite, index, task)?;
                            for &(regime, truth) in &truths {
                                out.push(ReplicationSummary::from_reports(&reports, Some(regime), truth));
                            }
                        }
                        Method::ExpertBon | Method::CorrectedIs => {}
                    }
                }
            }
            TaskSpec::Bon(task) => {
                let truth = task.true_solve_rate();
                for &method in &suite.methods {
                    if method.uses_milestones() {
                        continue;
                    }
                    let reports = bon_replications(suite, index, task, method)?;
                    out.push(ReplicationSummary::from_reports(&reports, None, truth));
                }
            }
        }
    }
    Ok(out)
}

/// Milestone estimates against both kinds of truth for one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub task: String,
    pub idealized_truth: f64,
    pub outcome_truth: f64,
    pub milestone_mean: f64,
    /// Mean upper (97.5%) interval bound.
    pub milestone_q975: f64,
    /// Fraction of replications whose 97.5% quantile lies below the truth.
    pub idealized_above_q975: f64,
    pub outcome_above_q975: f64,
    /// Two-sided interval coverage; absent for published single estimates.
    pub coverage_idealized: Option<f64>,
    pub coverage_outcome: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    pub rows: Vec<CalibrationRow>,
}

impl CalibrationTable {
    /// Tasks whose outcome truth exceeds the 97.5% quantile in a majority
    /// of replications.
    pub fn outcome_misses(&self) -> usize {
        self.rows.iter().filter(|r| r.outcome_above_q975 > 0.5).count()
    }

    pub fn idealized_misses(&self) -> usize {
        self.rows.iter().filter(|r| r.idealized_above_q975 > 0.5).count()
    }

    /// The same table built from published single estimates, taking the
    /// end-to-end column as the idealized truth.
    pub fn from_published(rows: &[PaperResultsRow]) -> Self {
        let above = |truth: f64, q: f64| if truth > q { 1.0 } else { 0.0 };
        Self {
            rows: rows
                .iter()
                .map(|r| CalibrationRow {
                    task: r.task.clone(),
                    idealized_truth: r.end_to_end,
                    outcome_truth: r.outcome_grading,
                    milestone_mean: r.milestone_mean,
                    milestone_q975: r.milestone_q975,
                    idealized_above_q975: above(r.end_to_end, r.milestone_q975),
                    outcome_above_q975: above(r.outcome_grading, r.milestone_q975),
                    coverage_idealized: None,
                    coverage_outcome: None,
                })
                .collect(),
        }
    }
}

fn fraction(flags: impl Iterator<Item = bool>) -> f64 {
    let (hits, total) = flags.fold((0usize, 0usize), |(h, t), f| (h + f as usize, t + 1));
    if total == 0 {
        0.0
    } else {
        hits as f64 / total as f64
    }
}

/// Replicated milestone estimates for every chain and graph task in the
/// suite, compared with both the idealized and outcome-based truths.
pub fn calibration_experiment(suite: &SuiteConfig) -> Result<CalibrationTable> {
    suite.validate()?;
    let mut rows = Vec::new();
    for (index, spec) in suite.tasks.iter().enumerate() {
        let Some(task) = spec.as_milestone_task() else {
            continue;
        };
        let idealized = exact_solve_rate(task, GradingRegime::Idealized)?;
        let outcome = exact_solve_rate(task, GradingRegime::OutcomeBased)?;
        let reports = milestone_replications(suite, index, task)?;
        let points: Vec<f64> = reports.iter().filter_map(|r| r.point_estimate).collect();
        let uppers: Vec<f64> = reports.iter().filter_map(|r| r.interval.map(|(_, hi)| hi)).collect();
        let coverage = |truth: f64| -> Option<f64> {
            let flags: Vec<bool> = reports.iter().filter_map(|r| r.covers(truth)).collect();
            (!flags.is_empty()).then(|| fraction(flags.into_iter()))
        };
        rows.push(CalibrationRow {
            task: spec.name().to_string(),
            idealized_truth: idealized,
            outcome_truth: outcome,
            milestone_mean: stats::mean_and_variance(&points).0,
            milestone_q975: if uppers.is_empty() { f64::NAN } else { stats::mean_and_variance(&uppers).0 },
            idealized_above_q975: fraction(uppers.iter().map(|&hi| idealized > hi)),
            outcome_above_q975: fraction(uppers.iter().map(|&hi| outcome > hi)),
            coverage_idealized: coverage(idealized),
            coverage_outcome: coverage(outcome),
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("suite has no chain or graph tasks".into()));
    }
    Ok(CalibrationTable { rows })
}

/// Expert best-of-N and corrected estimates on the same rollouts of one task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonBiasRow {
    pub task: String,
    pub truth: f64,
    /// Analytic expectation of the expert best-of-N estimate.
    pub expected_bon: Option<f64>,
    pub bon_mean: Option<f64>,
    pub corrected_mean: Option<f64>,
    pub underestimates: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BonBiasTable {
    pub rows: Vec<BonBiasRow>,
}

impl BonBiasTable {
    /// Published expert best-of-N estimates against the end-to-end rates.
    pub fn from_published(rows: &[PaperResultsRow]) -> Self {
        Self {
            rows: rows
                .iter()
                .map(|r| BonBiasRow {
                    task: r.task.clone(),
                    truth: r.end_to_end,
                    expected_bon: None,
                    bon_mean: Some(r.expert_bon),
                    corrected_mean: None,
                    underestimates: Some(r.expert_bon < r.end_to_end),
                })
                .collect(),
        }
    }
}

/// Analytic expectation of the expert best-of-N estimate, which averages
/// over successful rollouts only.
pub fn expected_expert_bon(task: &BoNTaskSpec) -> f64 {
    let factors: Vec<f64> = task
        .steps()
        .iter()
        .map(|&q| stats::expected_bon_step_factor(q, task.completions_per_step()))
        .collect();
    stats::product(&factors)
}

/// Both best-of-N estimators on `budgets.rollouts` shared rollouts of every
/// best-of-N task in the suite.
pub fn bon_bias_experiment(suite: &SuiteConfig) -> Result<BonBiasTable> {
    suite.validate()?;
    let mut rows = Vec::new();
    for (index, spec) in suite.tasks.iter().enumerate() {
        let TaskSpec::Bon(task) = spec else { continue };
        let seed = suite.seed_for(index, Method::ExpertBon, 0);
        let records = bon_rollouts(task, suite.budgets.rollouts, seed);
        let bon = expert_bon_from_records(task.name(), &records, seed);
        let corrected = corrected_is_from_records(task.name(), &records, seed);
        let truth = task.true_solve_rate();
        rows.push(BonBiasRow {
            task: task.name().to_string(),
            truth,
            expected_bon: (truth > 0.0).then(|| expected_expert_bon(task)),
            bon_mean: bon.point_estimate,
            corrected_mean: corrected.point_estimate,
            underestimates: bon.point_estimate.map(|b| b < truth),
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidArgument("suite has no best-of-N tasks".into()));
    }
    Ok(BonBiasTable { rows })
}

/// Effect of appending always-productive steps to a best-of-N task.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrivialStepReport {
    pub task: String,
    pub extra_steps: usize,
    pub truth_base: f64,
    pub truth_extended: f64,
    /// Mean expert bits over successful rollouts.
    pub mean_bits_base: Option<f64>,
    pub mean_bits_extended: Option<f64>,
    pub bon_mean_base: Option<f64>,
    pub bon_mean_extended: Option<f64>,
    /// Every rollout pays exactly one extra bit per added step (failed
    /// rollouts, which never reach the added steps, must be unchanged).
    pub bits_delta_exact: bool,
}

impl TrivialStepReport {
    pub fn estimate_ratio(&self) -> Option<f64> {
        Some(self.bon_mean_extended? / self.bon_mean_base?)
    }
}

pub fn trivial_step_experiment(
    base: &BoNTaskSpec,
    extra_trivial_steps: usize,
    rollouts: usize,
    master_seed: u64,
) -> Result<TrivialStepReport> {
    if rollouts == 0 {
        return Err(Error::InvalidArgument("rollout count must be at least 1".into()));
    }
    let extended = base.with_trivial_steps(extra_trivial_steps);
    let base_records = bon_rollouts(base, rollouts, master_seed);
    let ext_records = bon_rollouts(&extended, rollouts, master_seed);

    let extra = extra_trivial_steps as f64;
    let bits_delta_exact = base_records.iter().zip(&ext_records).all(|(b, e)| {
        if b.success {
            e.success && (e.bits_total - b.bits_total - extra).abs() <= 1e-9
        } else {
            !e.success && e.chosen_indices == b.chosen_indices
        }
    });
    let mean_bits = |records: &[crate::estimators::BoNRolloutRecord]| {
        let bits: Vec<f64> = records.iter().filter(|r| r.success).map(|r| r.bits_total).collect();
        (!bits.is_empty()).then(|| stats::mean_and_variance(&bits).0)
    };
    Ok(TrivialStepReport {
        task: base.name().to_string(),
        extra_steps: extra_trivial_steps,
        truth_base: base.true_solve_rate(),
        truth_extended: extended.true_solve_rate(),
        mean_bits_base: mean_bits(&base_records),
        mean_bits_extended: mean_bits(&ext_records),
        bon_mean_base: expert_bon_from_records(base.name(), &base_records, master_seed).point_estimate,
        bon_mean_extended: expert_bon_from_records(base.name(), &ext_records, master_seed).point_estimate,
        bits_delta_exact,
    })
}

fn agrees(empirical: f64, formula: f64) -> bool {
    if formula == 0.0 {
        empirical.abs() <= 1e-15
    } else {
        ((empirical - formula) / formula).abs() <= VARIANCE_AGREEMENT_TOLERANCE
    }
}

/// Empirical variances of the end-to-end (`n` rollouts) and milestone (`n`
/// per stage) estimators over `replications` runs, next to the closed forms.
pub fn variance_comparison_experiment(
    chain: &ChainTaskSpec,
    n: usize,
    replications: usize,
    master_seed: u64,
) -> Result<VarianceBreakdown> {
    if replications == 0 {
        return Err(Error::InvalidArgument("replications must be at least 1".into()));
    }
    let solvable = chain.message_budget() as usize >= chain.milestone_count();
    let mut breakdown = if solvable {
        VarianceBreakdown::closed_form(chain.name(), chain.milestone_probs(), n)?
    } else {
        VarianceBreakdown::closed_form(chain.name(), &[0.0], n)?
    };
    let config = EstimatorConfig::point_only();
    let run = |method: Method| -> Result<f64> {
        let reports = replicate(replications, |r| {
            let seed = seed::derive_path(master_seed, &[stream::REPLICATION, method as u64, r as u64]);
            match method {
                Method::EndToEnd => end_to_end_estimate(chain, GradingRegime::Idealized, n, seed, &config),
                _ => milestone_estimate(chain, n, seed, &config),
            }
        })?;
        let points: Vec<f64> = reports.iter().filter_map(|r| r.point_estimate).collect();
        Ok(stats::mean_and_variance(&points).1)
    };
    let e2e = run(Method::EndToEnd)?;
    let milestone = run(Method::Milestone)?;
    breakdown.empirical_end_to_end = Some(e2e);
    breakdown.empirical_milestone = Some(milestone);
    if replications >= VARIANCE_AGREEMENT_MIN_REPLICATIONS {
        breakdown.end_to_end_agrees = Some(agrees(e2e, breakdown.end_to_end_variance));
        breakdown.milestone_agrees = Some(agrees(milestone, breakdown.milestone_variance));
    }
    Ok(breakdown)
}
