use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::oracle;
use crate::error::{check_probability, Error, Result};

const WEIGHT_SUM_TOLERANCE: f64 = 1e-12;

/// A task made of milestones that an agent attempts one message at a time.
///
/// Milestones are indexed by their position in the canonical order, which is
/// the order the milestone estimator assumes.
pub trait MilestoneTask: Sync {
    fn name(&self) -> &str;

    fn milestone_count(&self) -> usize;

    fn message_budget(&self) -> u32;

    /// Per-attempt success probability of milestone `milestone`.
    fn success_prob(&self, milestone: usize) -> f64;

    /// Draws the order in which the simulated agent attempts the milestones.
    fn sample_order(&self, rng: &mut ChaCha8Rng) -> Vec<usize>;

    /// Every order the agent can take with its probability, or an error if
    /// there are more than `limit` of them.
    fn order_support(&self, limit: u128) -> Result<Vec<(Vec<usize>, f64)>>;
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChainTaskSpec {
    name: String,
    milestone_probs: Vec<f64>,
    message_budget: u32,
}

impl ChainTaskSpec {
    /// A `message_budget` below the milestone count is accepted; such a task
    /// can never be solved.
    pub fn new(name: impl Into<String>, milestone_probs: Vec<f64>, message_budget: u32) -> Result<Self> {
        let name = name.into();
        if milestone_probs.is_empty() {
            return Err(Error::spec(&name, "a chain needs at least one milestone"));
        }
        for (i, &p) in milestone_probs.iter().enumerate() {
            check_probability(|| format!("{name}: milestone_probs[{i}]"), p)?;
        }
        if message_budget == 0 {
            return Err(Error::spec(&name, "message_budget must be positive"));
        }
        Ok(Self {
            name,
            milestone_probs,
            message_budget,
        })
    }

    /// Chain whose budget is exactly its milestone count.
    pub fn with_tight_budget(name: impl Into<String>, milestone_probs: Vec<f64>) -> Result<Self> {
        let budget = milestone_probs.len().max(1) as u32;
        Self::new(name, milestone_probs, budget)
    }

    pub fn milestone_probs(&self) -> &[f64] {
        &self.milestone_probs
    }
}

impl MilestoneTask for ChainTaskSpec {
    fn name(&self) -> &str {
        &self.name
    }

    fn milestone_count(&self) -> usize {
        self.milestone_probs.len()
    }

    fn message_budget(&self) -> u32 {
        self.message_budget
    }

    fn success_prob(&self, milestone: usize) -> f64 {
        self.milestone_probs[milestone]
    }

    fn sample_order(&self, _rng: &mut ChaCha8Rng) -> Vec<usize> {
        (0..self.milestone_probs.len()).collect()
    }

    fn order_support(&self, _limit: u128) -> Result<Vec<(Vec<usize>, f64)>> {
        Ok(vec![((0..self.milestone_probs.len()).collect(), 1.0)])
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedOrder {
    /// Milestone indices (canonical positions) in attempt order.
    pub order: Vec<usize>,
    pub weight: f64,
}

/// Distribution over the orders the simulated agent attempts milestones in.
#[derive(Debug, Clone, PartialEq)]
pub enum OrderPolicy {
    /// Every permutation equally likely.
    Uniform,
    Weighted(Vec<WeightedOrder>),
}

/// Milestones that may be solved in more than one order.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTaskSpec {
    name: String,
    milestone_ids: Vec<String>,
    success_probs: Vec<f64>,
    order_policy: OrderPolicy,
    message_budget: u32,
}

impl GraphTaskSpec {
    /// `milestones` are given in canonical order as `(id, success_prob)`;
    /// orders in a weighted policy refer to positions in that list.
    pub fn new(
        name: impl Into<String>,
        milestones: Vec<(String, f64)>,
        order_policy: OrderPolicy,
        message_budget: u32,
    ) -> Result<Self> {
        let name = name.into();
        if milestones.is_empty() {
            return Err(Error::spec(&name, "a graph task needs at least one milestone"));
        }
        let n = milestones.len();
        let mut ids = Vec::with_capacity(n);
        let mut probs = Vec::with_capacity(n);
        for (id, p) in milestones {
            check_probability(|| format!("{name}: milestone {id}"), p)?;
            if ids.contains(&id) {
                return Err(Error::spec(&name, format!("duplicate milestone `{id}`")));
            }
            ids.push(id);
            probs.push(p);
        }
        if message_budget == 0 {
            return Err(Error::spec(&name, "message_budget must be positive"));
        }
        if let OrderPolicy::Weighted(orders) = &order_policy {
            if orders.is_empty() {
                return Err(Error::spec(&name, "order_policy has no orders"));
            }
            let mut total = 0.0;
            for wo in orders {
                if !(wo.weight >= 0.0 && wo.weight.is_finite()) {
                    return Err(Error::spec(&name, format!("bad order weight {}", wo.weight)));
                }
                if !is_permutation(&wo.order, n) {
                    return Err(Error::spec(
                        &name,
                        format!("order {:?} is not a permutation of the milestones", wo.order),
                    ));
                }
                total += wo.weight;
            }
            if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
                return Err(Error::spec(&name, format!("order weights sum to {total}, not 1")));
            }
        }
        Ok(Self {
            name,
            milestone_ids: ids,
            success_probs: probs,
            order_policy,
            message_budget,
        })
    }

    /// Two milestones with the same success probability, either order
    /// equally likely.
    pub fn pair(name: impl Into<String>, success_prob: f64, message_budget: u32) -> Result<Self> {
        Self::new(
            name,
            vec![("M1".into(), success_prob), ("M2".into(), success_prob)],
            OrderPolicy::Uniform,
            message_budget,
        )
    }

    pub fn milestone_ids(&self) -> &[String] {
        &self.milestone_ids
    }

    pub fn success_probs(&self) -> &[f64] {
        &self.success_probs
    }

    pub fn order_policy(&self) -> &OrderPolicy {
        &self.order_policy
    }

    /// Treats the canonical order as a chain, which is what the milestone
    /// estimator implicitly does.
    pub fn as_canonical_chain(&self) -> ChainTaskSpec {
        ChainTaskSpec {
            name: self.name.clone(),
            milestone_probs: self.success_probs.clone(),
            message_budget: self.message_budget,
        }
    }
}

fn is_permutation(order: &[usize], n: usize) -> bool {
    if order.len() != n {
        return false;
    }
    let mut seen = vec![false; n];
    for &m in order {
        if m >= n || seen[m] {
            return false;
        }
        seen[m] = true;
    }
    true
}

impl MilestoneTask for GraphTaskSpec {
    fn name(&self) -> &str {
        &self.name
    }

    fn milestone_count(&self) -> usize {
        self.success_probs.len()
    }

    fn message_budget(&self) -> u32 {
        self.message_budget
    }

    fn success_prob(&self, milestone: usize) -> f64 {
        self.success_probs[milestone]
    }

    fn sample_order(&self, rng: &mut ChaCha8Rng) -> Vec<usize> {
        match &self.order_policy {
            OrderPolicy::Uniform => {
                let mut order: Vec<usize> = (0..self.success_probs.len()).collect();
                order.shuffle(rng);
                order
            }
            OrderPolicy::Weighted(orders) => {
                let u: f64 = rng.random();
                let mut acc = 0.0;
                for wo in orders {
                    acc += wo.weight;
                    if u < acc {
                        return wo.order.clone();
                    }
                }
                // Weights sum to 1 only up to rounding.
                orders
                    .iter()
                    .rev()
                    .find(|wo| wo.weight > 0.0)
                    .map(|wo| wo.order.clone())
                    .expect("validated policy has positive weight")
            }
        }
    }

    fn order_support(&self, limit: u128) -> Result<Vec<(Vec<usize>, f64)>> {
        oracle::graph_order_support(self, limit)
    }
}

/// Best-of-N task: at every step the agent proposes `completions_per_step`
/// ranked completions, each productive with the step's probability.
#[derive(Debug, Clone, PartialEq)]
pub struct BoNTaskSpec {
    name: String,
    steps: Vec<f64>,
    completions_per_step: usize,
    agent_rank_dist: Vec<f64>,
}

impl BoNTaskSpec {
    pub fn new(
        name: impl Into<String>,
        steps: Vec<f64>,
        completions_per_step: usize,
        agent_rank_dist: Vec<f64>,
    ) -> Result<Self> {
        let name = name.into();
        if steps.is_empty() {
            return Err(Error::spec(&name, "a best-of-N task needs at least one step"));
        }
        for (i, &q) in steps.iter().enumerate() {
            check_probability(|| format!("{name}: steps[{i}]"), q)?;
        }
        if completions_per_step == 0 {
            return Err(Error::spec(&name, "completions_per_step must be at least 1"));
        }
        if agent_rank_dist.len() != completions_per_step {
            return Err(Error::spec(
                &name,
                format!(
                    "agent_rank_dist has {} entries, expected {completions_per_step}",
                    agent_rank_dist.len()
                ),
            ));
        }
        if agent_rank_dist.iter().any(|&w| !(w >= 0.0 && w.is_finite())) {
            return Err(Error::spec(&name, "agent_rank_dist entries must be non-negative"));
        }
        let total: f64 = agent_rank_dist.iter().sum();
        if (total - 1.0).abs() > WEIGHT_SUM_TOLERANCE {
            return Err(Error::spec(&name, format!("agent_rank_dist sums to {total}, not 1")));
        }
        Ok(Self {
            name,
            steps,
            completions_per_step,
            agent_rank_dist,
        })
    }

    /// `completions_per_step` completions with a uniform agent rank
    /// distribution.
    pub fn uniform_ranks(name: impl Into<String>, steps: Vec<f64>, completions_per_step: usize) -> Result<Self> {
        let n = completions_per_step.max(1);
        Self::new(name, steps, completions_per_step, vec![1.0 / n as f64; n])
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn steps(&self) -> &[f64] {
        &self.steps
    }

    pub fn completions_per_step(&self) -> usize {
        self.completions_per_step
    }

    pub fn agent_rank_dist(&self) -> &[f64] {
        &self.agent_rank_dist
    }

    /// Probability that the agent alone completes every step.
    pub fn true_solve_rate(&self) -> f64 {
        self.steps.iter().product()
    }

    /// The same task with `extra` always-productive steps appended.
    pub fn with_trivial_steps(&self, extra: usize) -> Self {
        let mut steps = self.steps.clone();
        steps.extend(std::iter::repeat_n(1.0, extra));
        Self {
            steps,
            ..self.clone()
        }
    }
}

/// Any task the configuration format can describe.
#[derive(Debug, Clone, PartialEq)]
pub enum TaskSpec {
    Chain(ChainTaskSpec),
    Graph(GraphTaskSpec),
    Bon(BoNTaskSpec),
}

impl TaskSpec {
    pub fn name(&self) -> &str {
        match self {
            TaskSpec::Chain(t) => t.name(),
            TaskSpec::Graph(t) => t.name(),
            TaskSpec::Bon(t) => t.name(),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            TaskSpec::Chain(_) => "chain",
            TaskSpec::Graph(_) => "graph",
            TaskSpec::Bon(_) => "bon",
        }
    }

    /// The milestone view of a chain or graph task.
    pub fn as_milestone_task(&self) -> Option<&dyn MilestoneTask> {
        match self {
            TaskSpec::Chain(t) => Some(t),
            TaskSpec::Graph(t) => Some(t),
            TaskSpec::Bon(_) => None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        super::config::parse_task(text, Path::new("<inline>"))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })?;
        super::config::parse_task(&text, path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn chain_validation() {
        assert!(ChainTaskSpec::new("c", vec![], 3).is_err());
        assert!(ChainTaskSpec::new("c", vec![1.2], 3).is_err());
        assert!(ChainTaskSpec::new("c", vec![f64::NAN], 3).is_err());
        assert!(ChainTaskSpec::new("c", vec![0.5], 0).is_err());
        // Unsolvable but valid.
        assert!(ChainTaskSpec::new("c", vec![0.5, 0.5], 1).is_ok());
    }

    #[test]
    fn graph_validation() {
        let ms = || vec![("a".to_string(), 0.5), ("b".to_string(), 0.5)];
        let bad_perm = OrderPolicy::Weighted(vec![WeightedOrder { order: vec![0, 0], weight: 1.0 }]);
        assert!(GraphTaskSpec::new("g", ms(), bad_perm, 4).is_err());
        let bad_sum = OrderPolicy::Weighted(vec![
            WeightedOrder { order: vec![0, 1], weight: 0.5 },
            WeightedOrder { order: vec![1, 0], weight: 0.4 },
        ]);
        assert!(GraphTaskSpec::new("g", ms(), bad_sum, 4).is_err());
        let dup = vec![("a".to_string(), 0.5), ("a".to_string(), 0.5)];
        assert!(GraphTaskSpec::new("g", dup, OrderPolicy::Uniform, 4).is_err());
        assert!(GraphTaskSpec::pair("p", 0.8, 4).is_ok());
    }

    #[test]
    fn bon_validation() {
        assert!(BoNTaskSpec::new("b", vec![0.5], 0, vec![]).is_err());
        assert!(BoNTaskSpec::new("b", vec![0.5], 2, vec![0.5, 0.6]).is_err());
        assert!(BoNTaskSpec::new("b", vec![0.5], 2, vec![1.5, -0.5]).is_err());
        assert!(BoNTaskSpec::new("b", vec![0.5], 2, vec![0.5]).is_err());
        let t = BoNTaskSpec::uniform_ranks("b", vec![0.9, 0.5], 16).unwrap();
        assert!((t.true_solve_rate() - 0.45).abs() < 1e-15);
        let ext = t.with_trivial_steps(2);
        assert_eq!(ext.steps(), &[0.9, 0.5, 1.0, 1.0]);
        assert_eq!(ext.true_solve_rate(), t.true_solve_rate());
    }
}
