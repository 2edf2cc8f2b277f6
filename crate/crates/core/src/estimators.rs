//! The four solve-rate estimators.

use rand::{Rng, RngCore};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed::{self, stream};
use crate::stats::{self, beta_quantile, posterior_product_quantiles};
use crate::task_model::{
    bon_rollouts, grade, simulate_from_prefix, simulate_rollout, BoNTaskSpec, GradingRegime,
    MilestoneTask, Trajectory,
};

pub use crate::stats::BetaPrior;

const INTERVAL_QUANTILES: [f64; 2] = [0.025, 0.975];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    EndToEnd,
    Milestone,
    ExpertBon,
    CorrectedIs,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::EndToEnd,
        Method::Milestone,
        Method::ExpertBon,
        Method::CorrectedIs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::EndToEnd => "end_to_end",
            Method::Milestone => "milestone",
            Method::ExpertBon => "expert_bon",
            Method::CorrectedIs => "corrected_is",
        }
    }

    /// Whether the method runs on milestone tasks (as opposed to best-of-N
    /// tasks).
    pub fn uses_milestones(self) -> bool {
        matches!(self, Method::EndToEnd | Method::Milestone)
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown method `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntervalConfig {
    pub prior: BetaPrior,
    /// Posterior draws for the milestone product interval.
    pub draws: usize,
}

impl Default for IntervalConfig {
    fn default() -> Self {
        Self {
            prior: BetaPrior::UNIFORM,
            draws: 10_000,
        }
    }
}

/// Priors for the point estimate and the 2.5%/97.5% interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimatorConfig {
    pub point_prior: BetaPrior,
    pub interval: Option<IntervalConfig>,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            point_prior: BetaPrior::ZERO,
            interval: Some(IntervalConfig::default()),
        }
    }
}

impl EstimatorConfig {
    /// No interval; used where only the point estimate's distribution
    /// matters.
    pub fn point_only() -> Self {
        Self {
            interval: None,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub task: String,
    pub method: Method,
    /// `None` when the method produced no estimate (see `absent_reason`).
    pub point_estimate: Option<f64>,
    pub absent_reason: Option<String>,
    /// 2.5% and 97.5% quantiles.
    pub interval: Option<(f64, f64)>,
    /// Samples per stage (a single entry for the one-stage methods).
    pub samples_used: Vec<usize>,
    pub master_seed: u64,
    /// Failed expert best-of-N rollouts left out of the mean.
    pub excluded_rollouts: usize,
    /// Successes per stage for the milestone method, successes overall for
    /// end-to-end.
    pub stage_successes: Vec<usize>,
    /// First milestone stage with no successes, if any.
    pub truncated_at_stage: Option<usize>,
}

impl EstimateReport {
    fn new(task: &str, method: Method, master_seed: u64) -> Self {
        Self {
            task: task.to_string(),
            method,
            point_estimate: None,
            absent_reason: None,
            interval: None,
            samples_used: Vec::new(),
            master_seed,
            excluded_rollouts: 0,
            stage_successes: Vec::new(),
            truncated_at_stage: None,
        }
    }

    pub fn covers(&self, truth: f64) -> Option<bool> {
        self.interval.map(|(lo, hi)| lo <= truth && truth <= hi)
    }
}

fn check_samples(n: usize, what: &str) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidArgument(format!("{what} must be at least 1")));
    }
    Ok(())
}

/// Plain Monte Carlo: the graded success fraction of `n` independent
/// rollouts, with an exact Beta posterior interval.
pub fn end_to_end_estimate<T: MilestoneTask + ?Sized>(
    task: &T,
    regime: GradingRegime,
    n: usize,
    master_seed: u64,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    check_samples(n, "rollout count")?;
    let base = seed::derive(master_seed, stream::ROLLOUT);
    let successes = (0..n)
        .into_par_iter()
        .with_min_len(256)
        .filter(|&i| grade(&simulate_rollout(task, seed::derive(base, i as u64)), task, regime))
        .count();

    let mut report = EstimateReport::new(task.name(), Method::EndToEnd, master_seed);
    report.point_estimate = Some(config.point_prior.posterior_mean(successes, n));
    report.interval = config.interval.map(|iv| {
        let (alpha, beta) = iv.prior.posterior(successes, n);
        (
            beta_quantile(alpha, beta, INTERVAL_QUANTILES[0]),
            beta_quantile(alpha, beta, INTERVAL_QUANTILES[1]),
        )
    });
    report.samples_used = vec![n];
    report.stage_successes = vec![successes];
    Ok(report)
}

/// Runs one milestone stage: `n` trials, each continuing a uniformly drawn
/// successful trajectory of the previous stage. Returns the successful
/// trajectories.
fn run_stage<T: MilestoneTask + ?Sized>(
    task: &T,
    stage: usize,
    pool: &[Trajectory],
    n: usize,
    master_seed: u64,
) -> Result<Vec<Trajectory>> {
    let base = seed::derive_path(master_seed, &[stream::STAGE, stage as u64]);
    let empty = Trajectory::empty(task.message_budget());
    let outcomes: Vec<Option<Trajectory>> = (0..n)
        .into_par_iter()
        .with_min_len(128)
        .map(|t| -> Result<Option<Trajectory>> {
            let mut rng = seed::rng(seed::derive(base, t as u64));
            let (prefix, origin) = if stage == 0 {
                (&empty, None)
            } else {
                let idx = rng.random_range(0..pool.len());
                (&pool[idx], Some(idx))
            };
            if prefix.remaining_messages() == 0 {
                // Out of messages before reaching this milestone.
                return Ok(None);
            }
            let mut traj = simulate_from_prefix(task, stage, prefix, rng.next_u64())?;
            traj.prefix_origin = origin;
            Ok((traj.completed_stages() == stage + 1).then_some(traj))
        })
        .collect::<Result<_>>()?;
    Ok(outcomes.into_iter().flatten().collect())
}

/// Milestone product estimator.
///
/// Stage 1 runs `n_per_stage` fresh rollouts up to the first milestone;
/// every later stage runs `n_per_stage` trials, each resuming a uniformly
/// drawn successful trajectory of the previous stage with the messages it
/// has left. Stages follow the task's canonical order. The point estimate
/// is the product of per-stage posterior means under `config.point_prior`,
/// and zero if some stage has no successes (later stages are then skipped).
pub fn milestone_estimate<T: MilestoneTask + ?Sized>(
    task: &T,
    n_per_stage: usize,
    master_seed: u64,
    config: &EstimatorConfig,
) -> Result<EstimateReport> {
    check_samples(n_per_stage, "samples per milestone")?;
    let mut report = EstimateReport::new(task.name(), Method::Milestone, master_seed);
    let mut pool: Vec<Trajectory> = Vec::new();
    for stage in 0..task.milestone_count() {
        pool = run_stage(task, stage, &pool, n_per_stage, master_seed)?;
        report.samples_used.push(n_per_stage);
        report.stage_successes.push(pool.len());
        if pool.is_empty() {
            report.truncated_at_stage = Some(stage);
            break;
        }
    }

    let point = if report.truncated_at_stage.is_some() {
        0.0
    } else {
        let means: Vec<f64> = report
            .stage_successes
            .iter()
            .map(|&s| config.point_prior.posterior_mean(s, n_per_stage))
            .collect();
        stats::product(&means)
    };
    report.point_estimate = Some(point);

    if let Some(iv) = config.interval {
        let q = posterior_product_quantiles(
            &report.stage_successes,
            &report.samples_used,
            iv.prior,
            iv.draws,
            &INTERVAL_QUANTILES,
            seed::derive(master_seed, stream::INTERVAL),
        )?;
        report.interval = Some((q[0], q[1]));
    }
    Ok(report)
}

/// One expert best-of-N rollout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoNRolloutRecord {
    /// 1-based rank chosen by the expert at each reached step.
    pub chosen_indices: Vec<u32>,
    pub bits_total: f64,
    pub success: bool,
    /// Productivity of every completion at every step, reached or not.
    pub productivity_masks: Vec<Vec<bool>>,
}

impl BoNRolloutRecord {
    /// `prod 1 / (i_j (i_j + 1))` for a successful rollout.
    pub fn expert_value(&self) -> Option<f64> {
        self.success.then(|| {
            let factors: Vec<f64> = self
                .chosen_indices
                .iter()
                .map(|&i| {
                    let i = i as f64;
                    1.0 / (i * (i + 1.0))
                })
                .collect();
            stats::product(&factors)
        })
    }

    /// Product over all steps of the productive fraction of completions.
    pub fn corrected_weight(&self) -> f64 {
        let fractions: Vec<f64> = self
            .productivity_masks
            .iter()
            .map(|mask| mask.iter().filter(|&&b| b).count() as f64 / mask.len() as f64)
            .collect();
        stats::product(&fractions)
    }
}

/// Expert-help cost in bits: `sum_j log2(i_j (i_j + 1))`.
pub fn bon_bits(chosen_indices: &[u32]) -> f64 {
    chosen_indices
        .iter()
        .map(|&i| {
            let i = i as f64;
            (i * (i + 1.0)).log2()
        })
        .sum()
}

/// Expert best-of-N estimate from already simulated rollouts: the mean of
/// `prod 1 / (i_j (i_j + 1))` over successful rollouts. Failed rollouts are
/// excluded; if every rollout failed there is no estimate.
pub fn expert_bon_from_records(task: &str, records: &[BoNRolloutRecord], master_seed: u64) -> EstimateReport {
    let mut report = EstimateReport::new(task, Method::ExpertBon, master_seed);
    let values: Vec<f64> = records.iter().filter_map(BoNRolloutRecord::expert_value).collect();
    report.samples_used = vec![records.len()];
    report.stage_successes = vec![values.len()];
    report.excluded_rollouts = records.len() - values.len();
    if values.is_empty() {
        report.absent_reason = Some(format!(
            "all {} rollouts failed; a zero estimate would mean infinitely many bits",
            records.len()
        ));
    } else {
        report.point_estimate = Some(values.iter().sum::<f64>() / values.len() as f64);
    }
    report
}

pub fn expert_bon_estimate(task: &BoNTaskSpec, rollouts: usize, master_seed: u64) -> Result<EstimateReport> {
    check_samples(rollouts, "rollout count")?;
    let records = bon_rollouts(task, rollouts, master_seed);
    Ok(expert_bon_from_records(task.name(), &records, master_seed))
}

/// Importance-sampling estimate with weights matched to the sampling
/// distribution: each rollout contributes the product over all steps of
/// the productive fraction of its completions, failures included as zero.
pub fn corrected_is_from_records(task: &str, records: &[BoNRolloutRecord], master_seed: u64) -> EstimateReport {
    let mut report = EstimateReport::new(task, Method::CorrectedIs, master_seed);
    let total: f64 = records.iter().map(BoNRolloutRecord::corrected_weight).sum();
    report.point_estimate = Some(total / records.len().max(1) as f64);
    report.samples_used = vec![records.len()];
    report.stage_successes = vec![records.iter().filter(|r| r.success).count()];
    report
}

pub fn corrected_is_estimate(task: &BoNTaskSpec, rollouts: usize, master_seed: u64) -> Result<EstimateReport> {
    check_samples(rollouts, "rollout count")?;
    let records = bon_rollouts(task, rollouts, master_seed);
    Ok(corrected_is_from_records(task.name(), &records, master_seed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::task_model::{ChainTaskSpec, GraphTaskSpec};

    fn record(indices: &[u32]) -> BoNRolloutRecord {
        BoNRolloutRecord {
            chosen_indices: indices.to_vec(),
            bits_total: bon_bits(indices),
            success: true,
            productivity_masks: Vec::new(),
        }
    }

    #[test]
    fn bits_examples() {
        assert_eq!(bon_bits(&[1]), 1.0);
        assert_eq!(bon_bits(&[]), 0.0);
        assert!((bon_bits(&[1, 3]) - (1.0 + 12f64.log2())).abs() < 1e-12);
        assert!((bon_bits(&[1, 3]) - 4.584_962_500_721_156).abs() < 1e-12);
    }

    #[test]
    fn per_rollout_expert_values() {
        assert_eq!(record(&[1, 1, 1]).expert_value(), Some(0.125));
        let v = record(&[3]).expert_value().unwrap();
        assert!((v - 1.0 / 12.0).abs() < 1e-15);
        assert!((record(&[3]).bits_total - 3.584_962_500_721_156).abs() < 1e-12);
        let mut failed = record(&[2]);
        failed.success = false;
        assert_eq!(failed.expert_value(), None);
    }

    #[test]
    fn all_failed_bon_has_no_estimate() {
        let t = BoNTaskSpec::uniform_ranks("never", vec![0.0], 4).unwrap();
        let r = expert_bon_estimate(&t, 50, 1).unwrap();
        assert_eq!(r.point_estimate, None);
        assert_eq!(r.excluded_rollouts, 50);
        assert!(r.absent_reason.is_some());
        let c = corrected_is_estimate(&t, 50, 1).unwrap();
        assert_eq!(c.point_estimate, Some(0.0));
    }

    #[test]
    fn certain_tasks() {
        let c = ChainTaskSpec::with_tight_budget("one", vec![1.0]).unwrap();
        let r = end_to_end_estimate(&c, GradingRegime::Idealized, 100, 3, &EstimatorConfig::default()).unwrap();
        assert_eq!(r.point_estimate, Some(1.0));
        let (lo, hi) = r.interval.unwrap();
        assert!(lo <= hi && hi <= 1.0 && lo > 0.9);

        let t = BoNTaskSpec::uniform_ranks("easy", vec![1.0, 1.0], 16).unwrap();
        let r = corrected_is_estimate(&t, 100, 3).unwrap();
        assert_eq!(r.point_estimate, Some(1.0));
        let r = expert_bon_estimate(&t, 100, 3).unwrap();
        assert_eq!(r.point_estimate, Some(0.25));
    }

    #[test]
    fn milestone_truncates_on_empty_stage() {
        let c = ChainTaskSpec::with_tight_budget("dead", vec![0.9, 0.0, 0.9]).unwrap();
        let r = milestone_estimate(&c, 50, 9, &EstimatorConfig::default()).unwrap();
        assert_eq!(r.truncated_at_stage, Some(1));
        assert_eq!(r.point_estimate, Some(0.0));
        assert_eq!(r.samples_used.len(), 2);
        let (lo, hi) = r.interval.unwrap();
        assert!(lo <= hi);
    }

    #[test]
    fn milestone_respects_budget() {
        let c = ChainTaskSpec::new("short", vec![1.0, 1.0, 1.0], 2).unwrap();
        let r = milestone_estimate(&c, 20, 1, &EstimatorConfig::point_only()).unwrap();
        assert_eq!(r.stage_successes, vec![20, 20, 0]);
        assert_eq!(r.point_estimate, Some(0.0));
    }

    #[test]
    fn milestone_point_is_product_of_ratios() {
        let c = ChainTaskSpec::with_tight_budget("c", vec![0.5, 0.4]).unwrap();
        let r = milestone_estimate(&c, 100, 5, &EstimatorConfig::point_only()).unwrap();
        let s = &r.stage_successes;
        let expected = (s[0] as f64 / 100.0) * (s[1] as f64 / 100.0);
        assert!((r.point_estimate.unwrap() - expected).abs() < 1e-15);
        // With a (1, 1) point prior the posterior means are used instead.
        let cfg = EstimatorConfig {
            point_prior: BetaPrior::UNIFORM,
            interval: None,
        };
        let r = milestone_estimate(&c, 100, 5, &cfg).unwrap();
        let expected = ((s[0] + 1) as f64 / 102.0) * ((s[1] + 1) as f64 / 102.0);
        assert!((r.point_estimate.unwrap() - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_samples_rejected() {
        let c = ChainTaskSpec::with_tight_budget("c", vec![0.5]).unwrap();
        assert!(end_to_end_estimate(&c, GradingRegime::Idealized, 0, 1, &EstimatorConfig::default()).is_err());
        assert!(milestone_estimate(&c, 0, 1, &EstimatorConfig::default()).is_err());
        let t = BoNTaskSpec::uniform_ranks("b", vec![0.5], 4).unwrap();
        assert!(expert_bon_estimate(&t, 0, 1).is_err());
        assert!(corrected_is_estimate(&t, 0, 1).is_err());
    }

    #[test]
    fn graph_milestone_follows_canonical_order() {
        let g = GraphTaskSpec::pair("pair", 0.8, 4).unwrap();
        let r = milestone_estimate(&g, 4000, 17, &EstimatorConfig::point_only()).unwrap();
        // Stage 1 needs the agent to start with M1: 0.5 * 0.8.
        let stage1 = r.stage_successes[0] as f64 / 4000.0;
        assert!((stage1 - 0.4).abs() < 0.03, "{stage1}");
        let stage2 = r.stage_successes[1] as f64 / 4000.0;
        assert!((stage2 - 0.8).abs() < 0.025, "{stage2}");
    }
}
