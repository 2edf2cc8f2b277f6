use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::spec::MilestoneTask;
use super::GradingRegime;
use crate::error::{Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Attempt {
    /// Canonical index of the milestone attempted.
    pub milestone: usize,
    pub success: bool,
}

/// One simulated agent run, possibly continuing a resampled prefix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Trajectory {
    /// The order the agent planned to attempt milestones in. Empty until the
    /// first attempt is simulated.
    pub order: Vec<usize>,
    pub attempts: Vec<Attempt>,
    pub messages_used: u32,
    pub message_budget: u32,
    /// Index of the previous-stage trajectory this one was continued from.
    pub prefix_origin: Option<usize>,
    pub final_submission_correct: bool,
}

impl Trajectory {
    /// A run that has not started yet.
    pub fn empty(message_budget: u32) -> Self {
        Self {
            order: Vec::new(),
            attempts: Vec::new(),
            messages_used: 0,
            message_budget,
            prefix_origin: None,
            final_submission_correct: false,
        }
    }

    pub fn remaining_messages(&self) -> u32 {
        self.message_budget.saturating_sub(self.messages_used)
    }

    /// Number of canonical milestones completed, in order, from the start.
    pub fn completed_stages(&self) -> usize {
        self.attempts
            .iter()
            .enumerate()
            .take_while(|(k, a)| a.success && a.milestone == *k)
            .count()
    }

    fn with_attempt(mut self, attempt: Attempt, milestone_count: usize) -> Self {
        self.attempts.push(attempt);
        self.messages_used += 1;
        self.final_submission_correct =
            self.attempts.len() == milestone_count && self.attempts.iter().all(|a| a.success);
        self
    }
}

fn attempt<T: MilestoneTask + ?Sized>(task: &T, milestone: usize, rng: &mut ChaCha8Rng) -> Attempt {
    let success = rng.random::<f64>() < task.success_prob(milestone);
    Attempt { milestone, success }
}

/// Runs the agent once: milestones in its drawn order, one message each,
/// stopping at the first failure or when the budget runs out.
pub fn simulate_rollout<T: MilestoneTask + ?Sized>(task: &T, rng_seed: u64) -> Trajectory {
    let mut rng = seed::rng(rng_seed);
    let n = task.milestone_count();
    let mut traj = Trajectory::empty(task.message_budget());
    traj.order = task.sample_order(&mut rng);
    for k in 0..n {
        if traj.remaining_messages() == 0 {
            break;
        }
        let a = attempt(task, traj.order[k], &mut rng);
        traj = traj.with_attempt(a, n);
        if !a.success {
            break;
        }
    }
    traj
}

/// Continues `prefix` through the milestone at (zero-based) `stage`.
///
/// The prefix must have completed exactly the canonical milestones
/// `0..stage` and still have messages left. An empty prefix at stage 0
/// draws a fresh agent order.
pub fn simulate_from_prefix<T: MilestoneTask + ?Sized>(
    task: &T,
    stage: usize,
    prefix: &Trajectory,
    rng_seed: u64,
) -> Result<Trajectory> {
    let n = task.milestone_count();
    if stage >= n {
        return Err(Error::InvalidArgument(format!(
            "stage {stage} is past the last milestone ({n} milestones)"
        )));
    }
    let reached = prefix.completed_stages();
    if reached != stage || prefix.attempts.len() != stage {
        return Err(Error::PrefixNotReached { stage, reached });
    }
    if prefix.remaining_messages() == 0 {
        return Err(Error::BudgetExhausted);
    }
    let mut rng = seed::rng(rng_seed);
    let mut traj = prefix.clone();
    traj.prefix_origin = None;
    if traj.order.is_empty() {
        traj.order = task.sample_order(&mut rng);
    }
    let a = attempt(task, traj.order[stage], &mut rng);
    Ok(traj.with_attempt(a, n))
}

/// Judges a finished trajectory under `regime`.
pub fn grade<T: MilestoneTask + ?Sized>(trajectory: &Trajectory, task: &T, regime: GradingRegime) -> bool {
    if trajectory.messages_used > task.message_budget() {
        return false;
    }
    match regime {
        GradingRegime::Idealized => trajectory.completed_stages() == task.milestone_count(),
        GradingRegime::OutcomeBased => trajectory.final_submission_correct,
    }
}
