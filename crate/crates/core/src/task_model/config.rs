//! TOML task descriptions.
//!
//! ```toml
//! kind = "graph"
//! name = "pair"
//! message_budget = 30
//! canonical_order = ["M1", "M2"]
//! order_policy = "uniform"
//!
//! [milestones]
//! M1 = 0.8
//! M2 = 0.8
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde::Deserialize;

use super::spec::{BoNTaskSpec, ChainTaskSpec, GraphTaskSpec, OrderPolicy, TaskSpec, WeightedOrder};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub(crate) enum RawTask {
    Chain {
        name: String,
        milestone_probs: Vec<f64>,
        message_budget: u32,
    },
    Graph {
        name: String,
        milestones: BTreeMap<String, f64>,
        canonical_order: Vec<String>,
        order_policy: RawOrderPolicy,
        message_budget: u32,
    },
    Bon {
        name: String,
        steps: Vec<f64>,
        completions_per_step: usize,
        agent_rank_dist: Vec<f64>,
    },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub(crate) enum RawOrderPolicy {
    Named(String),
    Weighted(Vec<RawWeightedOrder>),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub(crate) struct RawWeightedOrder {
    order: Vec<String>,
    weight: f64,
}

impl RawTask {
    pub(crate) fn into_spec(self) -> Result<TaskSpec> {
        match self {
            RawTask::Chain {
                name,
                milestone_probs,
                message_budget,
            } => Ok(TaskSpec::Chain(ChainTaskSpec::new(name, milestone_probs, message_budget)?)),
            RawTask::Graph {
                name,
                milestones,
                canonical_order,
                order_policy,
                message_budget,
            } => {
                if canonical_order.len() != milestones.len() {
                    return Err(Error::spec(
                        &name,
                        "canonical_order must list every milestone exactly once",
                    ));
                }
                let position = |id: &str| canonical_order.iter().position(|c| c == id);
                let mut ordered = Vec::with_capacity(canonical_order.len());
                for id in &canonical_order {
                    let p = milestones
                        .get(id)
                        .ok_or_else(|| Error::spec(&name, format!("unknown milestone `{id}` in canonical_order")))?;
                    ordered.push((id.clone(), *p));
                }
                let policy = match order_policy {
                    RawOrderPolicy::Named(s) if s == "uniform" => OrderPolicy::Uniform,
                    RawOrderPolicy::Named(s) => {
                        return Err(Error::spec(&name, format!("unknown order_policy `{s}`")))
                    }
                    RawOrderPolicy::Weighted(orders) => {
                        let mut out = Vec::with_capacity(orders.len());
                        for wo in orders {
                            let order = wo
                                .order
                                .iter()
                                .map(|id| {
                                    position(id).ok_or_else(|| {
                                        Error::spec(&name, format!("unknown milestone `{id}` in order_policy"))
                                    })
                                })
                                .collect::<Result<Vec<_>>>()?;
                            out.push(WeightedOrder {
                                order,
                                weight: wo.weight,
                            });
                        }
                        OrderPolicy::Weighted(out)
                    }
                };
                Ok(TaskSpec::Graph(GraphTaskSpec::new(name, ordered, policy, message_budget)?))
            }
            RawTask::Bon {
                name,
                steps,
                completions_per_step,
                agent_rank_dist,
            } => Ok(TaskSpec::Bon(BoNTaskSpec::new(
                name,
                steps,
                completions_per_step,
                agent_rank_dist,
            )?)),
        }
    }
}

pub(crate) fn parse_task(text: &str, path: &Path) -> Result<TaskSpec> {
    let raw: RawTask = toml::from_str(text).map_err(|e| Error::Config {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    raw.into_spec()
}
