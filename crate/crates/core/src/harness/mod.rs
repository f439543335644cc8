//! Experiment orchestration: seeded search loops against the simulated
//! oracle, summary statistics with paired significance tests, and
//! reproducible CSV/JSONL outputs.

mod bench_approx;
mod plots;
mod stats;

pub use bench_approx::{approx_quality_bench, bench_rows_csv, BenchRow};
pub use plots::{class_share_rows, emit_plot_data, min_class_count, reward_diff_trace};
pub use stats::{mean, median, paired_t_test, standard_error, TTest};

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fmt_f64;
use crate::model::PosteriorModel;
use crate::observed::{LabelId, ObservedSet};
use crate::policy::{PolicyKind, PolicyState, QueryPolicy};
use crate::problems::{
    gen_disks, gen_hardness, gen_unit_square, load_dataset, HardnessParams, LoadSpec, PriorSpec,
    ProblemInstance,
};
use crate::rewards::{RewardFamily, RewardKind};

/// Reward family specification, JSON-serializable (custom reward functions
/// are API-only).
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RewardSpec {
    pub kind: RewardSpecKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weights: Option<Vec<f64>>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RewardSpecKind {
    Linear,
    Log,
    Sqrt,
}

impl RewardSpec {
    pub fn new(kind: RewardSpecKind) -> Self {
        Self {
            kind,
            weights: None,
        }
    }

    pub fn parse(name: &str) -> Result<Self> {
        let kind = match name {
            "linear" => RewardSpecKind::Linear,
            "log" => RewardSpecKind::Log,
            "sqrt" => RewardSpecKind::Sqrt,
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown utility {other:?} (expected linear, log, or sqrt)"
                )))
            }
        };
        Ok(Self::new(kind))
    }

    pub fn to_family(&self, num_classes: usize) -> Result<RewardFamily> {
        let kind = match self.kind {
            RewardSpecKind::Linear => RewardKind::Linear,
            RewardSpecKind::Log => RewardKind::Log,
            RewardSpecKind::Sqrt => RewardKind::Sqrt,
        };
        match &self.weights {
            None => RewardFamily::new(kind, num_classes),
            Some(w) => {
                if w.len() != num_classes {
                    return Err(Error::ClassMismatch {
                        expected: num_classes,
                        got: w.len(),
                    });
                }
                RewardFamily::with_weights(kind, w.clone())
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            RewardSpecKind::Linear => "linear",
            RewardSpecKind::Log => "log",
            RewardSpecKind::Sqrt => "sqrt",
        }
    }
}

/// Problem source for an experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ProblemSpec {
    UnitSquare {
        #[serde(default = "defaults::unit_square_n")]
        n: usize,
        #[serde(default = "defaults::r_center")]
        r_center: f64,
        #[serde(default = "defaults::r_corner")]
        r_corner: f64,
        #[serde(default = "defaults::unit_square_k")]
        k: usize,
        seed: u64,
    },
    Hardness {
        m: u32,
        #[serde(default)]
        paper_scaling: bool,
        seed: u64,
    },
    Disks {
        n: usize,
        num_classes: usize,
        k: usize,
        seed: u64,
    },
    Files {
        labels: PathBuf,
        #[serde(default)]
        features: Option<PathBuf>,
        #[serde(default)]
        graph: Option<PathBuf>,
        k: usize,
        #[serde(default)]
        gamma_target: Option<f64>,
        #[serde(default)]
        gamma: Option<Vec<f64>>,
        #[serde(default)]
        unit_weights: bool,
    },
}

mod defaults {
    pub fn unit_square_n() -> usize {
        2500
    }
    pub fn r_center() -> f64 {
        0.10
    }
    pub fn r_corner() -> f64 {
        0.07
    }
    pub fn unit_square_k() -> usize {
        15
    }
}

impl ProblemSpec {
    pub fn build(&self) -> Result<ProblemInstance> {
        match self {
            ProblemSpec::UnitSquare {
                n,
                r_center,
                r_corner,
                k,
                seed,
            } => gen_unit_square(*n, *r_center, *r_corner, *k, *seed),
            ProblemSpec::Hardness {
                m,
                paper_scaling,
                seed,
            } => {
                let params = if *paper_scaling {
                    HardnessParams::paper_scaling(*m)?
                } else {
                    HardnessParams::desk(*m)?
                };
                gen_hardness(&params, *seed).map(|(instance, _)| instance)
            }
            ProblemSpec::Disks {
                n,
                num_classes,
                k,
                seed,
            } => gen_disks(*n, *num_classes, *k, *seed),
            ProblemSpec::Files {
                labels,
                features,
                graph,
                k,
                gamma_target,
                gamma,
                unit_weights,
            } => {
                let prior = match (gamma, gamma_target) {
                    (Some(v), _) => PriorSpec::Targets(v.clone()),
                    (None, Some(g)) => PriorSpec::UniformTarget(*g),
                    (None, None) => PriorSpec::Empirical,
                };
                load_dataset(&LoadSpec {
                    labels: labels.clone(),
                    features: features.clone(),
                    graph: graph.clone(),
                    k: *k,
                    prior,
                    unit_weights: *unit_weights,
                })
            }
        }
    }
}

/// One policy entry of an experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PolicySpec {
    pub kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
}

impl PolicySpec {
    pub fn parse(kind: &str) -> Self {
        Self {
            kind: kind.to_string(),
            beta: None,
            id: None,
        }
    }

    pub fn build(
        &self,
        num_classes: usize,
        search_rewards: RewardFamily,
        seed: u64,
        prune: bool,
        scoring_threads: usize,
    ) -> Result<PolicyState> {
        let kind = match self.kind.as_str() {
            "das" => PolicyKind::Das,
            "ens" => PolicyKind::Ens,
            "one_step" | "one-step" => PolicyKind::OneStep,
            "rr_greedy" | "rr-greedy" => PolicyKind::RrGreedy,
            "rr_ucb" | "rr-ucb" => PolicyKind::RrUcb,
            "rr_ens" | "rr-ens" => PolicyKind::RrEns,
            "random" => PolicyKind::Random,
            other => {
                return Err(Error::InvalidConfig(format!("unknown policy {other:?}")))
            }
        };
        let mut policy = PolicyState::new(kind, num_classes, search_rewards, seed)?
            .with_prune(prune)
            .with_scoring_threads(scoring_threads);
        if let Some(beta) = self.beta {
            policy = policy.with_beta(beta)?;
        }
        if let Some(id) = &self.id {
            policy = policy.with_id(id.clone());
        }
        Ok(policy)
    }
}

/// Full experiment description; mirrors the JSON config document.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub problem: ProblemSpec,
    pub policies: Vec<PolicySpec>,
    pub search_utility: RewardSpec,
    /// Utility used for evaluation traces and reported results; defaults to
    /// the search utility.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval_utility: Option<RewardSpec>,
    pub budget: usize,
    pub repeats: usize,
    pub base_seed: u64,
    #[serde(default = "default_true")]
    pub pruning: bool,
    #[serde(default = "default_one")]
    pub threads: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_true() -> bool {
    true
}
fn default_one() -> usize {
    1
}

impl ExperimentConfig {
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(json)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.repeats < 1 {
            return Err(Error::InvalidConfig("repeats must be >= 1".into()));
        }
        if self.budget < 1 {
            return Err(Error::InvalidConfig("budget must be >= 1".into()));
        }
        if self.policies.is_empty() {
            return Err(Error::InvalidConfig("no policies configured".into()));
        }
        Ok(())
    }

    pub fn eval_spec(&self) -> &RewardSpec {
        self.eval_utility.as_ref().unwrap_or(&self.search_utility)
    }
}

/// One seeded search trajectory.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub policy_id: String,
    pub seed: u64,
    /// The free initial observation: a uniformly drawn target.
    pub initial: (usize, LabelId),
    /// The `T` queries with their revealed labels, in order.
    pub queries: Vec<(usize, LabelId)>,
    /// Utility under the evaluation rewards: initial value, then one entry
    /// per query.
    pub trace: Vec<f64>,
    /// Final per-class observation counts (including the negative class).
    pub final_counts: Vec<u32>,
    /// Wall-clock seconds per policy selection.
    pub iter_seconds: Vec<f64>,
    /// Lookahead batch sizes per iteration for lookahead policies.
    pub lookahead_sizes: Vec<Option<usize>>,
    /// Per-iteration candidate counts and pruning outcomes.
    pub candidates: Vec<usize>,
    pub fully_scored: Vec<usize>,
    pub partially_scored: Vec<usize>,
    pub pruned: Vec<usize>,
}

impl RunRecord {
    /// Re-scores the stored trajectory under another reward family without
    /// re-running the search.
    pub fn rescore(&self, rewards: &RewardFamily) -> Vec<f64> {
        let mut counts = crate::observed::ClassCounts::zeros(rewards.num_classes());
        counts.increment(self.initial.1.index0());
        let mut trace =
            Vec::with_capacity(self.queries.len() + 1);
        trace.push(crate::rewards::utility(&counts, rewards).expect("class counts match"));
        for &(_, label) in &self.queries {
            counts.increment(label.index0());
            trace.push(crate::rewards::utility(&counts, rewards).expect("class counts match"));
        }
        trace
    }

    pub fn final_utility(&self) -> f64 {
        *self.trace.last().expect("trace never empty")
    }
}

/// Runs one seeded search: draws a uniform initial target, then loops the
/// policy against the oracle for `budget` queries, tracing utility under the
/// evaluation rewards.
pub fn run_search(
    instance: &ProblemInstance,
    policy: &mut dyn QueryPolicy,
    budget: usize,
    seed: u64,
    eval_rewards: &RewardFamily,
) -> Result<RunRecord> {
    let n = instance.num_points();
    let targets = instance.target_points();
    if targets.is_empty() {
        return Err(Error::InvalidInstance("no targets to seed with".into()));
    }
    if budget > n - 1 {
        return Err(Error::BudgetExceedsPool {
            budget,
            unlabeled: n - 1,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let initial_point = targets[rng.gen_range(0..targets.len())];
    let initial_label = instance.oracle_label(initial_point);

    let mut model = PosteriorModel::new(instance.graph.clone(), instance.prior.clone());
    let mut observed = ObservedSet::new(n, instance.num_classes());
    model.observe(initial_point, initial_label)?;
    observed.insert(initial_point, initial_label)?;
    policy.observe(initial_point, initial_label);

    let mut record = RunRecord {
        policy_id: policy.id().to_string(),
        seed,
        initial: (initial_point, initial_label),
        queries: Vec::with_capacity(budget),
        trace: Vec::with_capacity(budget + 1),
        final_counts: Vec::new(),
        iter_seconds: Vec::with_capacity(budget),
        lookahead_sizes: Vec::with_capacity(budget),
        candidates: Vec::with_capacity(budget),
        fully_scored: Vec::with_capacity(budget),
        partially_scored: Vec::with_capacity(budget),
        pruned: Vec::with_capacity(budget),
    };
    record
        .trace
        .push(crate::rewards::utility(observed.counts(), eval_rewards)?);

    for t in 0..budget {
        let start = Instant::now();
        let selection = policy.select(&mut model, observed.counts(), t, budget)?;
        let elapsed = start.elapsed().as_secs_f64();
        let label = instance.oracle_label(selection.point);
        model.observe(selection.point, label)?;
        observed.insert(selection.point, label)?;
        policy.observe(selection.point, label);

        record.queries.push((selection.point, label));
        record
            .trace
            .push(crate::rewards::utility(observed.counts(), eval_rewards)?);
        record.iter_seconds.push(elapsed);
        record.lookahead_sizes.push(selection.lookahead);
        record.candidates.push(selection.stats.candidates);
        record.fully_scored.push(selection.stats.fully_scored);
        record.partially_scored.push(selection.stats.partially_scored);
        record.pruned.push(selection.stats.pruned);
    }
    record.final_counts = observed.counts().as_slice().to_vec();
    Ok(record)
}

/// Per-policy aggregate over repeats.
#[derive(Clone, Debug, Serialize)]
pub struct PolicySummary {
    pub policy_id: String,
    pub mean_utility: f64,
    pub stderr: f64,
    pub per_class_mean_counts: Vec<f64>,
    pub mean_runtime_s: f64,
    pub median_runtime_s: f64,
    pub mean_fully_scored_share: f64,
    /// Paired t-test against the best policy (the best tests as degenerate
    /// against itself).
    pub vs_best: TTest,
}

/// Everything `run_experiment` produces, before serialization.
#[derive(Clone, Debug)]
pub struct ExperimentSummary {
    pub policies: Vec<PolicySummary>,
    pub best_policy: String,
    pub records: Vec<Vec<RunRecord>>,
    pub num_classes: usize,
}

/// Runs every configured policy for `repeats` seeded searches on one shared
/// instance and aggregates results. Repeats run in parallel when
/// `threads > 1`; outputs are byte-identical either way.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentSummary> {
    config.validate()?;
    let instance = config.problem.build()?;
    run_experiment_on(config, &instance)
}

/// [`run_experiment`] against an already-built instance.
pub fn run_experiment_on(
    config: &ExperimentConfig,
    instance: &ProblemInstance,
) -> Result<ExperimentSummary> {
    config.validate()?;
    let c = instance.num_classes();
    let search_rewards = config.search_utility.to_family(c)?;
    let eval_rewards = config.eval_spec().to_family(c)?;

    // Seeds are base_seed + repeat index; the instance is fixed for the
    // whole experiment while the initial target resamples per repeat.
    let jobs: Vec<(usize, u64)> = (0..config.policies.len())
        .flat_map(|p| {
            (0..config.repeats).map(move |r| (p, r as u64))
        })
        .map(|(p, r)| (p, config.base_seed.wrapping_add(r)))
        .collect();
    let run_one = |&(p, seed): &(usize, u64)| -> Result<RunRecord> {
        let spec = &config.policies[p];
        let mut policy = spec.build(c, search_rewards.clone(), seed, config.pruning, 1)?;
        run_search(instance, &mut policy, config.budget, seed, &eval_rewards)
    };

    let results: Vec<Result<RunRecord>> = if config.threads > 1 {
        jobs.par_iter().map(run_one).collect()
    } else {
        jobs.iter().map(run_one).collect()
    };
    let mut records: Vec<Vec<RunRecord>> = vec![Vec::new(); config.policies.len()];
    for ((p, _), result) in jobs.iter().zip(results) {
        records[*p].push(result?);
    }

    summarize(config, instance, records)
}

fn summarize(
    config: &ExperimentConfig,
    instance: &ProblemInstance,
    records: Vec<Vec<RunRecord>>,
) -> Result<ExperimentSummary> {
    let c = instance.num_classes();
    let finals: Vec<Vec<f64>> = records
        .iter()
        .map(|rs| rs.iter().map(|r| r.final_utility()).collect())
        .collect();
    let best_idx = (0..records.len())
        .max_by(|&a, &b| mean(&finals[a]).total_cmp(&mean(&finals[b])))
        .expect("at least one policy");

    let mut policies = Vec::with_capacity(records.len());
    for (p, rs) in records.iter().enumerate() {
        let runtimes: Vec<f64> = rs
            .iter()
            .map(|r| r.iter_seconds.iter().sum::<f64>())
            .collect();
        let mut per_class = vec![0.0; c];
        for r in rs {
            for (cls, &count) in r.final_counts.iter().enumerate() {
                per_class[cls] += count as f64;
            }
        }
        per_class.iter_mut().for_each(|v| *v /= rs.len() as f64);
        let scored_share: Vec<f64> = rs
            .iter()
            .flat_map(|r| {
                r.fully_scored
                    .iter()
                    .zip(&r.candidates)
                    .map(|(&f, &n)| if n == 0 { 1.0 } else { f as f64 / n as f64 })
            })
            .collect();
        let vs_best = if config.repeats >= 2 {
            paired_t_test(&finals[p], &finals[best_idx])?
        } else {
            TTest {
                t: 0.0,
                p: 1.0,
                degenerate: true,
            }
        };
        policies.push(PolicySummary {
            policy_id: rs[0].policy_id.clone(),
            mean_utility: mean(&finals[p]),
            stderr: standard_error(&finals[p]),
            per_class_mean_counts: per_class,
            mean_runtime_s: mean(&runtimes),
            median_runtime_s: median(&runtimes),
            mean_fully_scored_share: mean(&scored_share),
            vs_best,
        });
    }
    let summary = ExperimentSummary {
        best_policy: policies[best_idx].policy_id.clone(),
        policies,
        records,
        num_classes: c,
    };
    if let Some(dir) = &config.output_dir {
        write_outputs(&summary, dir)?;
    }
    Ok(summary)
}

/// Writes `summary.csv`, `summary.json`, and `runs.jsonl`. Floats carry 17
/// significant digits so outputs are reproducible bit-for-bit.
pub fn write_outputs(summary: &ExperimentSummary, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let mut csv = String::from("policy,mean,stderr,p_vs_best,runtime_s\n");
    for p in &summary.policies {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            p.policy_id,
            fmt_f64(p.mean_utility),
            fmt_f64(p.stderr),
            fmt_f64(p.vs_best.p),
            fmt_f64(p.median_runtime_s),
        ));
    }
    std::fs::write(dir.join("summary.csv"), csv)?;

    let json = serde_json::json!({
        "best_policy": summary.best_policy,
        "policies": summary.policies,
    });
    std::fs::write(
        dir.join("summary.json"),
        serde_json::to_string_pretty(&json)?,
    )?;

    let mut jsonl = std::io::BufWriter::new(std::fs::File::create(dir.join("runs.jsonl"))?);
    for rs in &summary.records {
        for r in rs {
            serde_json::to_writer(&mut jsonl, r)?;
            jsonl.write_all(b"\n")?;
        }
    }
    jsonl.flush()?;
    Ok(())
}

/// Sizes the global worker pool used for parallel repeats. Call once,
/// before the first parallel experiment; later calls fail harmlessly.
pub fn configure_thread_pool(threads: usize) -> Result<()> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::InvalidConfig(e.to_string()))
}

/// Reads a `runs.jsonl` file back into records grouped by policy id, in
/// first-seen order.
pub fn read_runs_jsonl(path: &Path) -> Result<Vec<(String, Vec<RunRecord>)>> {
    use std::io::BufRead;
    let file = std::fs::File::open(path)?;
    let mut groups: Vec<(String, Vec<RunRecord>)> = Vec::new();
    for line in std::io::BufReader::new(file).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: RunRecord = serde_json::from_str(&line)?;
        match groups.iter_mut().find(|(id, _)| *id == record.policy_id) {
            Some((_, rs)) => rs.push(record),
            None => groups.push((record.policy_id.clone(), vec![record])),
        }
    }
    Ok(groups)
}
