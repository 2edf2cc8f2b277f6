use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use taskrate_core::stats::posterior_product_quantiles;
use taskrate_core::{
    expert_bon_estimate, milestone_estimate, simulate_rollout, BetaPrior, BoNTaskSpec, ChainTaskSpec,
    EstimatorConfig, GraphTaskSpec,
};

fn rollouts(c: &mut Criterion) {
    let chain = ChainTaskSpec::with_tight_budget("chain", vec![0.9, 0.8, 0.7, 0.6]).unwrap();
    let graph = GraphTaskSpec::pair("pair", 0.8, 2).unwrap();
    let mut seed = 0u64;
    c.bench_function("simulate_rollout/chain4", |b| {
        b.iter(|| {
            seed += 1;
            simulate_rollout(&chain, black_box(seed))
        })
    });
    c.bench_function("simulate_rollout/graph_pair", |b| {
        b.iter(|| {
            seed += 1;
            simulate_rollout(&graph, black_box(seed))
        })
    });
}

fn estimators(c: &mut Criterion) {
    let chain = ChainTaskSpec::with_tight_budget("chain", vec![0.5, 0.6, 0.7]).unwrap();
    let with_interval = EstimatorConfig::default();
    let point_only = EstimatorConfig::point_only();
    c.bench_function("milestone_estimate/n500_point", |b| {
        b.iter(|| milestone_estimate(&chain, 500, black_box(7), &point_only).unwrap())
    });
    c.bench_function("milestone_estimate/n500_interval", |b| {
        b.iter(|| milestone_estimate(&chain, 500, black_box(7), &with_interval).unwrap())
    });
    c.bench_function("posterior_product_quantiles/3_stages_10k", |b| {
        b.iter(|| {
            posterior_product_quantiles(
                &[250, 180, 150],
                &[500, 500, 500],
                BetaPrior::UNIFORM,
                10_000,
                &[0.025, 0.975],
                black_box(11),
            )
            .unwrap()
        })
    });
    let bon = BoNTaskSpec::uniform_ranks("bon", vec![0.9, 0.8], 16).unwrap();
    c.bench_function("expert_bon_estimate/1k_rollouts", |b| {
        b.iter(|| expert_bon_estimate(&bon, 1000, black_box(3)).unwrap())
    });
}

criterion_group!(benches, rollouts, estimators);
criterion_main!(benches);
