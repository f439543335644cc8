//! Benchmark of batch expected-utility estimators: exact enumeration where
//! feasible, Monte Carlo at several sample counts, and the Jensen bound.
//!
//! Protocol: label a training set of 50 points per class on a synthetic
//! instance, compute posteriors, draw random unlabeled batches of each
//! requested size, and report every estimator's RMSE against the best
//! available ground truth (exact when `C^b` fits the enumeration limit, the
//! largest Monte Carlo run otherwise) together with mean evaluation time.

use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::batch::{
    exact_batch_expectation, jensen_bound, mc_batch_expectation, Batch, BatchMember,
    DEFAULT_ENUMERATION_LIMIT,
};
use crate::error::Result;
use crate::model::PosteriorModel;
use crate::observed::ClassCounts;
use crate::problems::gen_disks;
use crate::rewards::RewardFamily;

/// Results of one (batch size, estimator) cell.
#[derive(Clone, Debug, serde::Serialize)]
pub struct BenchRow {
    pub b: usize,
    pub estimator: String,
    /// RMSE against the ground truth; `None` for the ground truth itself.
    pub rmse: Option<f64>,
    pub mean_time_s: f64,
    pub ground_truth: String,
}

const MC_SAMPLE_COUNTS: [usize; 3] = [1 << 5, 1 << 10, 1 << 15];

/// Times `f`, repeating cheap calls until at least ~20 ms accumulate so
/// sub-microsecond estimators get stable readings.
fn time_call<T>(mut f: impl FnMut() -> T) -> (T, f64) {
    let start = Instant::now();
    let out = f();
    let mut elapsed = start.elapsed().as_secs_f64();
    let mut calls = 1u32;
    while elapsed < 0.02 && calls < 1 << 20 {
        let batch = calls; // double the work each round
        let start = Instant::now();
        for _ in 0..batch {
            std::hint::black_box(f());
        }
        elapsed += start.elapsed().as_secs_f64();
        calls += batch;
    }
    (out, elapsed / calls as f64)
}

/// Runs the estimator benchmark. Log rewards, `50·C` training points, and
/// `repeats` random batches per size.
pub fn approx_quality_bench(
    num_classes: usize,
    b_grid: &[usize],
    repeats: usize,
    seed: u64,
) -> Result<Vec<BenchRow>> {
    let per_class = 50usize;
    // Size the instance so every class can fill its training quota with
    // plenty of unlabeled points left over.
    let n = (per_class * num_classes * 6).max(1200);
    let instance = gen_disks(n, num_classes, 25, seed)?;
    let mut model = PosteriorModel::new(instance.graph.clone(), instance.prior.clone());
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);

    // Training set: 50 random points per class.
    let mut counts = ClassCounts::zeros(num_classes);
    for cls in 1..=num_classes as u32 {
        let mut members: Vec<usize> = (0..n)
            .filter(|&x| instance.oracle_label(x).value() == cls)
            .collect();
        assert!(
            members.len() >= per_class,
            "class {cls} has only {} points",
            members.len()
        );
        members.shuffle(&mut rng);
        for &x in &members[..per_class] {
            let label = instance.oracle_label(x);
            model.observe(x, label)?;
            counts.increment(label.index0());
        }
    }
    let rewards = RewardFamily::log(num_classes);
    let unlabeled: Vec<usize> = (0..n).filter(|&x| !model.is_observed(x)).collect();

    let mut rows = Vec::new();
    for &b in b_grid {
        let exact_feasible = (num_classes as u128)
            .checked_pow(b as u32)
            .map(|o| o <= DEFAULT_ENUMERATION_LIMIT as u128)
            .unwrap_or(false);
        let gt_name = if exact_feasible { "exact" } else { "mc_32768" };

        // values[estimator][repeat], times[estimator] summed.
        let names: Vec<String> = std::iter::once("exact".to_string())
            .chain(MC_SAMPLE_COUNTS.iter().map(|s| format!("mc_{s}")))
            .chain(std::iter::once("jensen".to_string()))
            .collect();
        let mut values: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
        let mut times: Vec<Vec<f64>> = vec![Vec::new(); names.len()];

        for rep in 0..repeats {
            let batch = random_batch(&unlabeled, &model, b, &mut rng);
            if exact_feasible {
                let (v, t) = time_call(|| {
                    exact_batch_expectation(&batch, &counts, &rewards, DEFAULT_ENUMERATION_LIMIT)
                        .expect("feasibility checked")
                });
                values[0].push(v);
                times[0].push(t);
            }
            for (i, &samples) in MC_SAMPLE_COUNTS.iter().enumerate() {
                let mc_seed = seed
                    .wrapping_add(rep as u64)
                    .wrapping_mul(1315423911)
                    .wrapping_add(samples as u64);
                let (v, t) =
                    time_call(|| mc_batch_expectation(&batch, &counts, &rewards, samples, mc_seed));
                values[1 + i].push(v);
                times[1 + i].push(t);
            }
            let (v, t) = time_call(|| jensen_bound(&batch, &counts, &rewards));
            values[names.len() - 1].push(v);
            times[names.len() - 1].push(t);
        }

        let gt_idx = if exact_feasible { 0 } else { 3 };
        for (i, name) in names.iter().enumerate() {
            if values[i].is_empty() {
                continue;
            }
            let rmse = if i == gt_idx {
                None
            } else {
                let se: f64 = values[i]
                    .iter()
                    .zip(&values[gt_idx])
                    .map(|(v, gt)| (v - gt) * (v - gt))
                    .sum();
                Some((se / values[i].len() as f64).sqrt())
            };
            rows.push(BenchRow {
                b,
                estimator: name.clone(),
                rmse,
                mean_time_s: crate::harness::mean(&times[i]),
                ground_truth: gt_name.to_string(),
            });
        }
    }
    Ok(rows)
}

fn random_batch(
    unlabeled: &[usize],
    model: &PosteriorModel,
    b: usize,
    rng: &mut ChaCha8Rng,
) -> Batch {
    let picks = rand::seq::index::sample(rng, unlabeled.len(), b.min(unlabeled.len()));
    Batch::from_members(
        picks
            .iter()
            .map(|i| {
                let x = unlabeled[i];
                BatchMember {
                    point: x,
                    probs: model.posterior(x),
                }
            })
            .collect(),
    )
}

/// Serializes bench rows as CSV with 17-significant-digit floats.
pub fn bench_rows_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("b,estimator,rmse,mean_time_s,ground_truth\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.b,
            r.estimator,
            r.rmse.map(crate::fmt_f64).unwrap_or_default(),
            crate::fmt_f64(r.mean_time_s),
            r.ground_truth,
        ));
    }
    out
}
