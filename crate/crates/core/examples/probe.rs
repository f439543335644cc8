//! Scratch probe: pruning effectiveness and runtime on the unit-square toy.
//! Run: cargo run --release -p das-core --example probe -- [n] [budget] [seeds]

use std::time::Instant;

use das_core::harness::run_search;
use das_core::policy::{PolicyKind, PolicyState};
use das_core::problems::gen_unit_square;
use das_core::rewards::RewardFamily;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2500);
    let budget: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(100);
    let seeds: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(3);
    let mode: String = args.get(4).cloned().unwrap_or_else(|| "both".into());
    let k: usize = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(50);
    let r_c: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let r_k: f64 = args.get(7).and_then(|s| s.parse().ok()).unwrap_or(0.10);

    let instance = gen_unit_square(n, r_c, r_k, k, 7).unwrap();
    let rewards = RewardFamily::log(6);

    for seed in 0..seeds {
        let before = das_core::batch::engine_counters();
        let t0 = Instant::now();
        let mut pruned = PolicyState::new(PolicyKind::Das, 6, rewards.clone(), seed)
            .unwrap()
            .with_prune(true);
        let rp = run_search(&instance, &mut pruned, budget, seed, &rewards).unwrap();
        let t_pruned = t0.elapsed().as_secs_f64();
        let after = das_core::batch::engine_counters();
        println!(
            "  pruned engine: calls={} steps={} recomputes={} consumed={} bulk={}",
            after.0 - before.0,
            after.1 - before.1,
            after.2 - before.2,
            after.3 - before.3,
            after.4 - before.4
        );
        if mode == "pruned" {
            let tail: Vec<f64> = rp
                .fully_scored
                .iter()
                .zip(&rp.candidates)
                .skip(10)
                .map(|(&f, &c)| f as f64 / c as f64)
                .collect();
            let mean_tail = tail.iter().sum::<f64>() / tail.len() as f64;
            println!(
                "seed {seed}: pruned={t_pruned:.2}s fully-scored(>10)={:.1}% final-u={:.3}",
                100.0 * mean_tail,
                rp.trace.last().unwrap()
            );
            continue;
        }

        let t0 = Instant::now();
        let mut full = PolicyState::new(PolicyKind::Das, 6, rewards.clone(), seed)
            .unwrap()
            .with_prune(false);
        let rf = run_search(&instance, &mut full, budget, seed, &rewards).unwrap();
        let t_full = t0.elapsed().as_secs_f64();

        let identical = rp.queries == rf.queries;
        let tail: Vec<f64> = rp
            .fully_scored
            .iter()
            .zip(&rp.candidates)
            .skip(10)
            .map(|(&f, &c)| f as f64 / c as f64)
            .collect();
        let mean_tail = tail.iter().sum::<f64>() / tail.len() as f64;
        let partial_tail: f64 = rp
            .partially_scored
            .iter()
            .zip(&rp.candidates)
            .skip(10)
            .map(|(&f, &c)| f as f64 / c as f64)
            .sum::<f64>()
            / tail.len() as f64;
        println!(
            "seed {seed}: identical={identical} pruned={t_pruned:.2}s full={t_full:.2}s \
             fully-scored(>10)={:.1}% partial(>10)={:.1}% final-u={:.3}",
            100.0 * mean_tail,
            100.0 * partial_tail,
            rp.trace.last().unwrap()
        );
    }
}
