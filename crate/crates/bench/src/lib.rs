//! Shared fixtures for the criterion benches.

use das_core::harness::run_search;
use das_core::policy::{PolicyKind, PolicyState};
use das_core::problems::{gen_unit_square, ProblemInstance};
use das_core::rewards::RewardFamily;
use das_core::{ClassCounts, ObservedSet, PosteriorModel};

/// A mid-search model state: a unit-square instance advanced `t` queries by
/// the one-step policy.
pub struct MidSearch {
    pub instance: ProblemInstance,
    pub model: PosteriorModel,
    pub counts: ClassCounts,
}

pub fn mid_search(n: usize, k: usize, t: usize, seed: u64) -> MidSearch {
    let instance = gen_unit_square(n, 0.10, 0.07, k, seed).unwrap();
    let rewards = RewardFamily::log(instance.num_classes());
    let mut policy =
        PolicyState::new(PolicyKind::OneStep, instance.num_classes(), rewards.clone(), seed)
            .unwrap();
    let record = run_search(&instance, &mut policy, t, seed, &rewards).unwrap();

    let mut model = PosteriorModel::new(instance.graph.clone(), instance.prior.clone());
    let mut observed = ObservedSet::new(instance.num_points(), instance.num_classes());
    let (p0, l0) = record.initial;
    model.observe(p0, l0).unwrap();
    observed.insert(p0, l0).unwrap();
    for &(p, l) in &record.queries {
        model.observe(p, l).unwrap();
        observed.insert(p, l).unwrap();
    }
    MidSearch {
        instance,
        model,
        counts: observed.counts().clone(),
    }
}
