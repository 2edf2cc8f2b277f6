use rand::Rng;
use rayon::prelude::*;

use super::spec::BoNTaskSpec;
use crate::estimators::{bon_bits, BoNRolloutRecord};
use crate::seed;

/// Simulates one expert-guided best-of-N rollout.
///
/// Productivity masks for every step are drawn up front, in step order, so
/// the masks of a step do not depend on whether earlier steps succeeded.
/// The simulated expert takes the lowest-ranked productive completion.
pub fn simulate_bon_rollout(task: &BoNTaskSpec, rng_seed: u64) -> BoNRolloutRecord {
    let mut rng = seed::rng(rng_seed);
    let n_c = task.completions_per_step();
    let masks: Vec<Vec<bool>> = task
        .steps()
        .iter()
        .map(|&q| (0..n_c).map(|_| rng.random::<f64>() < q).collect())
        .collect();

    let mut chosen = Vec::with_capacity(masks.len());
    let mut success = true;
    for mask in &masks {
        match mask.iter().position(|&productive| productive) {
            Some(i) => chosen.push(i as u32 + 1),
            None => {
                success = false;
                break;
            }
        }
    }
    BoNRolloutRecord {
        bits_total: bon_bits(&chosen),
        chosen_indices: chosen,
        success,
        productivity_masks: masks,
    }
}

/// `count` rollouts with per-rollout seeds derived from `master_seed`.
pub fn bon_rollouts(task: &BoNTaskSpec, count: usize, master_seed: u64) -> Vec<BoNRolloutRecord> {
    let base = seed::derive(master_seed, seed::stream::ROLLOUT);
    (0..count)
        .into_par_iter()
        .with_min_len(256)
        .map(|i| simulate_bon_rollout(task, seed::derive(base, i as u64)))
        .collect()
}
