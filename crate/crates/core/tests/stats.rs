use proptest::prelude::*;
use taskrate_core::stats::{
    bernoulli_variance, prior_partial_sum, product, product_estimator_variance, variance_inequality_check,
};

#[test]
fn prior_partial_sums_are_exact() {
    for k in [1u64, 2, 16, 1000, 1_000_000] {
        let expected = 1.0 - 1.0 / (k as f64 + 1.0);
        assert!((prior_partial_sum(k) - expected).abs() <= 1e-12, "K={k}");
    }
    assert_eq!(prior_partial_sum(0), 0.0);
}

#[test]
fn variance_examples() {
    assert!((bernoulli_variance(0.25, 100).unwrap() - 0.001875).abs() < 1e-15);
    assert!((product_estimator_variance(&[0.5, 0.5], 100).unwrap() - 0.00125).abs() < 1e-15);
}

fn prob() -> impl Strategy<Value = f64> {
    (1u32..=1_000_000).prop_map(|k| f64::from(k) / 1e6)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn inequality_holds(probs in prop::collection::vec(prob(), 1..12)) {
        prop_assert!(variance_inequality_check(&probs));
    }

    #[test]
    fn product_estimator_never_worse(probs in prop::collection::vec(prob(), 1..12), n in 1usize..5000) {
        let joint = product(&probs);
        let milestone = product_estimator_variance(&probs, n).unwrap();
        let e2e = bernoulli_variance(joint, n).unwrap();
        prop_assert!(milestone <= e2e * (1.0 + 1e-9) + 1e-300);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn partial_sums_increase_and_stay_below_one(k in 1u64..100_000) {
        let a = prior_partial_sum(k);
        let b = prior_partial_sum(k + 1);
        prop_assert!(a < b && b < 1.0);
    }
}
