//! Synthetic task models standing in for an LLM agent.
//!
//! A task is either a sequence of milestones attempted by the agent
//! ([`ChainTaskSpec`], [`GraphTaskSpec`]) or a sequence of best-of-N steps
//! ([`BoNTaskSpec`]). All of them have a solve rate that can be computed
//! exactly, which is what every bias measurement in this crate is taken
//! against.

mod bon;
mod config;
mod oracle;
mod simulate;
mod spec;

use serde::{Deserialize, Serialize};

pub use bon::{bon_rollouts, simulate_bon_rollout};
pub use oracle::{exact_solve_rate, exact_solve_rate_with_limit, DEFAULT_PERMUTATION_LIMIT};
pub use simulate::{grade, simulate_from_prefix, simulate_rollout, Attempt, Trajectory};
pub use spec::{
    BoNTaskSpec, ChainTaskSpec, GraphTaskSpec, MilestoneTask, OrderPolicy, TaskSpec,
    WeightedOrder,
};

pub(crate) use config::RawTask;

/// How a finished rollout is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradingRegime {
    /// Every milestone must be submitted correctly, in the canonical order.
    Idealized,
    /// Only the final answer counts; milestones may be solved in any order.
    OutcomeBased,
}

impl GradingRegime {
    pub const ALL: [GradingRegime; 2] = [GradingRegime::Idealized, GradingRegime::OutcomeBased];

    pub fn as_str(self) -> &'static str {
        match self {
            GradingRegime::Idealized => "idealized",
            GradingRegime::OutcomeBased => "outcome_based",
        }
    }
}

impl std::fmt::Display for GradingRegime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for GradingRegime {
    type Err = crate::Error;

    fn from_str(s: &str) -> crate::Result<Self> {
        match s {
            "idealized" => Ok(GradingRegime::Idealized),
            "outcome_based" | "outcome" => Ok(GradingRegime::OutcomeBased),
            other => Err(crate::Error::InvalidArgument(format!(
                "unknown grading regime `{other}`"
            ))),
        }
    }
}
