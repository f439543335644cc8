//! Single-iteration diagnostics at criterion scale: bound tightness, scan
//! outcome counts, and per-call timing at several search depths.
//! Run: cargo run --release -p das-core --example probe_iter -- [n] [T] [k]

use std::time::Instant;

use das_core::observed::ObservedSet;
use das_core::policy::{EvalStatus, Lookahead, PolicyKind, PolicyState, QueryPolicy};
use das_core::problems::gen_unit_square;
use das_core::rewards::RewardFamily;
use das_core::PosteriorModel;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(2500);
    let budget: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(200);
    let k: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(50);
    let r_c: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.15);
    let r_k: f64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(0.10);

    let instance = gen_unit_square(n, r_c, r_k, k, 7).unwrap();
    let rewards = RewardFamily::log(6);
    let mut model = PosteriorModel::new(instance.graph.clone(), instance.prior.clone());
    let mut observed = ObservedSet::new(n, 6);
    // Seed with one target, then advance with one-step (fast) to mid-state.
    let target = instance.target_points()[0];
    model.observe(target, instance.oracle_label(target)).unwrap();
    observed.insert(target, instance.oracle_label(target)).unwrap();
    let mut onestep = PolicyState::new(PolicyKind::OneStep, 6, rewards.clone(), 1).unwrap();

    for t in 0..budget {
        if [10usize, 50, 100, 150].contains(&t) {
            let b = budget - t - 1;
            let mut scorer = Lookahead::new(&mut model, observed.counts(), &rewards, b);
            let t0 = Instant::now();
            let (point, stats, detail) = scorer.pruned_scan(true).unwrap();
            let scan_s = t0.elapsed().as_secs_f64();
            let mut alpha_star = f64::NEG_INFINITY;
            let mut bounds: Vec<f64> = Vec::new();
            for d in &detail {
                if let Some(a) = d.score {
                    alpha_star = alpha_star.max(a);
                }
                bounds.push(d.score_bound.unwrap());
            }
            bounds.sort_by(|a, b| b.total_cmp(a));
            let med = bounds[bounds.len() / 2];
            let exact: Vec<&_> = detail
                .iter()
                .filter(|d| d.status == EvalStatus::Exact)
                .collect();
            let exact_scores: Vec<f64> = exact.iter().map(|d| d.score.unwrap()).collect();
            let min_exact = exact_scores.iter().cloned().fold(f64::INFINITY, f64::min);
            println!(
                "t={t} b={b}: scan={scan_s:.2}s candidates={} full={} partial={} pruned={} \
                 alpha*={alpha_star:.4} bound[max]={:.4} bound[med]={med:.4} min_exact={min_exact:.4} point={point}",
                stats.candidates, stats.fully_scored, stats.partially_scored, stats.pruned,
                bounds[0],
            );
        }
        let sel = onestep
            .select(&mut model, observed.counts(), t, budget)
            .unwrap();
        let label = instance.oracle_label(sel.point);
        model.observe(sel.point, label).unwrap();
        observed.insert(sel.point, label).unwrap();
    }
}
