use proptest::prelude::*;
use taskrate_core::harness::expected_expert_bon;
use taskrate_core::stats::{bits_to_prob, mean_and_variance, posterior_product_quantiles};
use taskrate_core::{
    bon_bits, corrected_is_estimate, end_to_end_estimate, expert_bon_estimate, milestone_estimate,
    BetaPrior, BoNRolloutRecord, BoNTaskSpec, ChainTaskSpec, EstimatorConfig, GradingRegime, GraphTaskSpec,
};

const IDEALIZED: GradingRegime = GradingRegime::Idealized;

#[test]
fn end_to_end_on_chain_pair() {
    let task = ChainTaskSpec::with_tight_budget("pair", vec![0.5, 0.5]).unwrap();
    let report = end_to_end_estimate(&task, IDEALIZED, 10_000, 7, &EstimatorConfig::default()).unwrap();
    let p = report.point_estimate.unwrap();
    assert!((p - 0.25).abs() <= 0.013, "{p}");
    let (lo, hi) = report.interval.unwrap();
    assert!(lo <= p && p <= hi);
}

#[test]
fn milestone_point_is_product_of_stage_ratios() {
    let task = ChainTaskSpec::with_tight_budget("three", vec![0.6, 0.5, 0.9]).unwrap();
    let report = milestone_estimate(&task, 400, 13, &EstimatorConfig::default()).unwrap();
    let expected: f64 = report.stage_successes.iter().map(|&s| s as f64 / 400.0).product();
    assert!((report.point_estimate.unwrap() - expected).abs() < 1e-15);
    assert_eq!(report.samples_used, vec![400, 400, 400]);
    let (lo, hi) = report.interval.unwrap();
    assert!(lo < expected && expected < hi);
}

#[test]
fn milestone_on_unordered_pair_tracks_idealized_truth() {
    let task = GraphTaskSpec::pair("pair", 0.8, 2).unwrap();
    let report = milestone_estimate(&task, 10_000, 17, &EstimatorConfig::point_only()).unwrap();
    let p = report.point_estimate.unwrap();
    assert!((p - 0.32).abs() <= 0.015, "{p}");
}

#[test]
fn single_milestone_matches_end_to_end_distribution() {
    let task = ChainTaskSpec::with_tight_budget("one", vec![0.3]).unwrap();
    let config = EstimatorConfig::point_only();
    let collect = |milestone: bool| -> Vec<f64> {
        (0..1000u64)
            .map(|r| {
                let report = if milestone {
                    milestone_estimate(&task, 200, 1000 + r, &config)
                } else {
                    end_to_end_estimate(&task, IDEALIZED, 200, 5000 + r, &config)
                };
                report.unwrap().point_estimate.unwrap()
            })
            .collect()
    };
    let (m_mean, m_var) = mean_and_variance(&collect(true));
    let (e_mean, e_var) = mean_and_variance(&collect(false));
    let var = 0.3 * 0.7 / 200.0;
    assert!((m_mean - 0.3).abs() < 0.003 && (e_mean - 0.3).abs() < 0.003);
    assert!((m_var / var - 1.0).abs() < 0.15 && (e_var / var - 1.0).abs() < 0.15);
}

#[test]
fn estimates_stay_within_four_standard_errors() {
    let task = ChainTaskSpec::with_tight_budget("pair", vec![0.5, 0.5]).unwrap();
    let config = EstimatorConfig::point_only();
    let n = 2000;
    let se_e2e = (0.25 * 0.75 / n as f64).sqrt();
    let se_ms = (0.0625 * 2.0 / n as f64).sqrt();
    let (mut e2e_ok, mut ms_ok) = (0, 0);
    for r in 0..200u64 {
        let e = end_to_end_estimate(&task, IDEALIZED, n, r, &config).unwrap();
        let m = milestone_estimate(&task, n, r, &config).unwrap();
        e2e_ok += usize::from((e.point_estimate.unwrap() - 0.25).abs() < 4.0 * se_e2e);
        ms_ok += usize::from((m.point_estimate.unwrap() - 0.25).abs() < 4.0 * se_ms);
    }
    assert!(e2e_ok >= 198 && ms_ok >= 198, "{e2e_ok} {ms_ok}");
}

#[test]
fn posterior_quantiles_match_closed_forms() {
    // Beta(1, 101): F^-1(u) = 1 - (1 - u)^(1/101).
    let q = posterior_product_quantiles(&[0], &[100], BetaPrior::UNIFORM, 10_000, &[0.975], 3).unwrap();
    let exact = 1.0 - 0.025f64.powf(1.0 / 101.0);
    assert!((q[0] - exact).abs() < 0.002, "{} vs {exact}", q[0]);
    let median = posterior_product_quantiles(&[50], &[100], BetaPrior::UNIFORM, 10_000, &[0.5], 3).unwrap();
    assert!((median[0] - 0.5).abs() < 0.005);
}

#[test]
fn expert_bon_single_step() {
    let task = BoNTaskSpec::uniform_ranks("q09", vec![0.9], 16).unwrap();
    let report = expert_bon_estimate(&task, 10_000, 23).unwrap();
    let p = report.point_estimate.unwrap();
    assert!((p - 0.4658).abs() <= 0.01, "{p}");
    assert!((expected_expert_bon(&task) - 0.4658).abs() < 1e-4);
    assert!(p < task.true_solve_rate());
}

#[test]
fn expert_bon_without_successes_is_absent() {
    let task = BoNTaskSpec::uniform_ranks("hopeless", vec![0.5, 0.0], 4).unwrap();
    let report = expert_bon_estimate(&task, 500, 1).unwrap();
    assert_eq!(report.point_estimate, None);
    assert!(report.absent_reason.is_some());
    assert_eq!(report.excluded_rollouts, 500);
}

#[test]
fn corrected_importance_sampling_is_unbiased() {
    let one = BoNTaskSpec::uniform_ranks("one", vec![0.9], 16).unwrap();
    let p = corrected_is_estimate(&one, 10_000, 29).unwrap().point_estimate.unwrap();
    assert!((p - 0.9).abs() <= 0.0075, "{p}");
    let two = BoNTaskSpec::uniform_ranks("two", vec![0.9, 0.8], 16).unwrap();
    let p = corrected_is_estimate(&two, 10_000, 31).unwrap().point_estimate.unwrap();
    assert!((p - 0.72).abs() <= 0.01, "{p}");
}

#[test]
fn rejects_empty_sample_budgets() {
    let chain = ChainTaskSpec::with_tight_budget("c", vec![0.5]).unwrap();
    let bon = BoNTaskSpec::uniform_ranks("b", vec![0.5], 4).unwrap();
    let config = EstimatorConfig::default();
    assert!(end_to_end_estimate(&chain, IDEALIZED, 0, 1, &config).is_err());
    assert!(milestone_estimate(&chain, 0, 1, &config).is_err());
    assert!(expert_bon_estimate(&bon, 0, 1).is_err());
    assert!(corrected_is_estimate(&bon, 0, 1).is_err());
}

fn successful(indices: Vec<u32>) -> BoNRolloutRecord {
    BoNRolloutRecord {
        bits_total: bon_bits(&indices),
        chosen_indices: indices,
        success: true,
        productivity_masks: Vec::new(),
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 256, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn expert_value_decreases_with_rank(
        indices in prop::collection::vec(1u32..32, 1..6),
        pos in any::<prop::sample::Index>(),
    ) {
        let j = pos.index(indices.len());
        let mut worse = indices.clone();
        worse[j] += 1;
        let v = successful(indices.clone()).expert_value().unwrap();
        prop_assert!(successful(worse).expert_value().unwrap() < v);
        prop_assert!(v <= 0.5f64.powi(indices.len() as i32) * (1.0 + 1e-12));
    }

    #[test]
    fn bits_round_trip(indices in prop::collection::vec(1u32..1000, 0..20)) {
        let value: f64 = indices.iter().map(|&i| 1.0 / (f64::from(i) * (f64::from(i) + 1.0))).product();
        let back = bits_to_prob(bon_bits(&indices));
        prop_assert!((back - value).abs() <= 1e-9 * value.max(f64::MIN_POSITIVE));
    }

    #[test]
    fn posterior_quantiles_are_monotone_in_successes(
        trials in prop::collection::vec(5usize..200, 1..4),
        fracs in prop::collection::vec(0.0f64..1.0, 3),
        stage in any::<prop::sample::Index>(),
        seed in any::<u64>(),
    ) {
        let successes: Vec<usize> = trials.iter().zip(&fracs).map(|(&n, f)| (f * n as f64) as usize).collect();
        let j = stage.index(trials.len());
        prop_assume!(successes[j] < trials[j]);
        let mut more = successes.clone();
        more[j] += 1;
        let qs = [0.025, 0.5, 0.975];
        let lo = posterior_product_quantiles(&successes, &trials, BetaPrior::UNIFORM, 2000, &qs, seed).unwrap();
        let hi = posterior_product_quantiles(&more, &trials, BetaPrior::UNIFORM, 2000, &qs, seed).unwrap();
        for (a, b) in lo.iter().zip(&hi) {
            prop_assert!(a <= b, "{:?} vs {:?}", lo, hi);
        }
    }
}
