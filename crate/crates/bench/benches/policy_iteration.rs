use criterion::{criterion_group, criterion_main, Criterion};

use das_bench::mid_search;
use das_core::policy::{das_score, Lookahead};
use das_core::rewards::RewardFamily;

fn policy_iteration(c: &mut Criterion) {
    let mut state = mid_search(1200, 15, 40, 3);
    let rewards = RewardFamily::log(state.instance.num_classes());
    let candidate = (0..state.instance.num_points())
        .find(|&x| !state.model.is_observed(x))
        .unwrap();

    let mut group = c.benchmark_group("policy_iteration");
    group.sample_size(20);
    group.bench_function("das_score_b80", |bench| {
        bench.iter(|| das_score(candidate, &mut state.model, &state.counts, 80, &rewards).unwrap())
    });
    group.bench_function("pruned_select_b80", |bench| {
        bench.iter(|| {
            let mut scorer = Lookahead::new(&mut state.model, &state.counts, &rewards, 80);
            scorer.select_pruned().unwrap().0
        })
    });
    group.finish();
}

criterion_group!(benches, policy_iteration);
criterion_main!(benches);
