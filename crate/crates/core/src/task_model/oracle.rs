//! Exact solve rates by enumeration over the agent's possible orders.

use itertools::Itertools;

use super::spec::{GraphTaskSpec, MilestoneTask, OrderPolicy};
use super::GradingRegime;
use crate::error::{Error, Result};

/// 10! orders.
pub const DEFAULT_PERMUTATION_LIMIT: u128 = 3_628_800;

/// Exact probability that a rollout of `task` is graded a success.
pub fn exact_solve_rate<T: MilestoneTask + ?Sized>(task: &T, regime: GradingRegime) -> Result<f64> {
    exact_solve_rate_with_limit(task, regime, DEFAULT_PERMUTATION_LIMIT)
}

/// As [`exact_solve_rate`], failing when more than `limit` orders would have
/// to be enumerated.
pub fn exact_solve_rate_with_limit<T: MilestoneTask + ?Sized>(
    task: &T,
    regime: GradingRegime,
    limit: u128,
) -> Result<f64> {
    let n = task.milestone_count();
    let support = task.order_support(limit)?;
    // One message per attempt: fewer messages than milestones never finishes.
    if (task.message_budget() as usize) < n {
        return Ok(0.0);
    }
    let mut total = 0.0;
    for (order, weight) in &support {
        let in_canonical_order = order.iter().enumerate().all(|(k, &m)| k == m);
        let counts = match regime {
            GradingRegime::Idealized => in_canonical_order,
            GradingRegime::OutcomeBased => true,
        };
        if counts {
            let p: f64 = order.iter().map(|&m| task.success_prob(m)).product();
            total += weight * p;
        }
    }
    Ok(total.clamp(0.0, 1.0))
}

fn factorial(n: usize) -> u128 {
    (1..=n as u128).try_fold(1u128, |acc, k| acc.checked_mul(k)).unwrap_or(u128::MAX)
}

pub(super) fn graph_order_support(task: &GraphTaskSpec, limit: u128) -> Result<Vec<(Vec<usize>, f64)>> {
    let n = task.milestone_count();
    match task.order_policy() {
        OrderPolicy::Uniform => {
            let count = factorial(n);
            if count > limit {
                return Err(Error::PermutationLimit { count, limit });
            }
            let weight = 1.0 / count as f64;
            Ok((0..n).permutations(n).map(|p| (p, weight)).collect())
        }
        OrderPolicy::Weighted(orders) => {
            let count = orders.len() as u128;
            if count > limit {
                return Err(Error::PermutationLimit { count, limit });
            }
            Ok(orders.iter().map(|wo| (wo.order.clone(), wo.weight)).collect())
        }
    }
}
