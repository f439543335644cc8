//! `das` — active search experiments from the command line.
//!
//! Subcommands: `run` (experiment from a JSON config, with flag overrides),
//! `gen` (write a problem instance to files), `bench-approx` (batch
//! expected-utility estimator benchmark), `plots` (plot CSVs from stored
//! runs).

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use das_core::harness::{
    approx_quality_bench, bench_rows_csv, emit_plot_data, read_runs_jsonl, run_experiment,
    ExperimentConfig, PolicySpec, RewardSpec,
};
use das_core::problems::{gen_disks, gen_hardness, gen_unit_square, HardnessParams};

#[derive(Parser)]
#[command(name = "das", about = "Nonmyopic multiclass active search harness", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run(RunArgs),
    /// Generate a problem instance and write it to a directory.
    Gen(GenArgs),
    /// Benchmark batch expected-utility estimators (exact, MC, Jensen).
    BenchApprox(BenchArgs),
    /// Emit plot CSVs from a runs.jsonl file.
    Plots(PlotArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Path to the experiment config (JSON).
    #[arg(long)]
    config: PathBuf,
    /// Override the base seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Override the number of repeats.
    #[arg(long)]
    repeats: Option<usize>,
    /// Override the query budget T.
    #[arg(long)]
    budget: Option<usize>,
    /// Replace the policy list (repeatable): das, ens, one_step, rr_greedy,
    /// rr_ucb, rr_ens, random.
    #[arg(long = "policy")]
    policies: Vec<String>,
    /// Override the search utility: linear, log, or sqrt.
    #[arg(long)]
    utility: Option<String>,
    /// Override the evaluation utility: linear, log, or sqrt.
    #[arg(long)]
    eval_utility: Option<String>,
    /// Disable branch-and-bound pruning.
    #[arg(long)]
    no_prune: bool,
    /// Worker threads for parallel repeats (outputs are identical).
    #[arg(long)]
    threads: Option<usize>,
    /// Output directory (overrides the config).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Generator: unit-square, hardness, or disks.
    generator: String,
    #[arg(long, default_value_t = 2500)]
    n: usize,
    /// Center-region radius (unit-square).
    #[arg(long, default_value_t = 0.10)]
    r_center: f64,
    /// Corner-region radius (unit-square).
    #[arg(long, default_value_t = 0.07)]
    r_corner: f64,
    /// Neighbors per point for the k-NN graph.
    #[arg(long, default_value_t = 15)]
    k: usize,
    /// Hardness free parameter m (desk preset), or with --paper-scaling the
    /// published scaling.
    #[arg(long, default_value_t = 2)]
    m: u32,
    #[arg(long)]
    paper_scaling: bool,
    /// Number of classes (disks generator).
    #[arg(long, default_value_t = 5)]
    classes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long, default_value_t = 5)]
    classes: usize,
    /// Comma-separated batch sizes.
    #[arg(long, default_value = "3,10")]
    batch_sizes: String,
    #[arg(long, default_value_t = 10)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PlotArgs {
    /// runs.jsonl produced by `das run`.
    #[arg(long)]
    runs: PathBuf,
    /// Policy pair for the cumulative-reward difference trace (a minus b).
    #[arg(long)]
    policy_a: Option<String>,
    #[arg(long)]
    policy_b: Option<String>,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run(args) => run(args),
        Command::Gen(args) => gen(args),
        Command::BenchApprox(args) => bench(args),
        Command::Plots(args) => plots(args),
    }
}

fn run(args: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)
        .with_context(|| format!("reading {}", args.config.display()))?;
    let mut config = ExperimentConfig::from_json(&text)?;
    if let Some(seed) = args.seed {
        config.base_seed = seed;
    }
    if let Some(repeats) = args.repeats {
        config.repeats = repeats;
    }
    if let Some(budget) = args.budget {
        config.budget = budget;
    }
    if !args.policies.is_empty() {
        config.policies = args.policies.iter().map(|p| PolicySpec::parse(p)).collect();
    }
    if let Some(u) = &args.utility {
        config.search_utility = RewardSpec::parse(u)?;
    }
    if let Some(u) = &args.eval_utility {
        config.eval_utility = Some(RewardSpec::parse(u)?);
    }
    if args.no_prune {
        config.pruning = false;
    }
    if let Some(threads) = args.threads {
        config.threads = threads;
    }
    if let Some(out) = args.out {
        config.output_dir = Some(out);
    }
    if config.threads > 1 {
        rayon_threads(config.threads)?;
    }

    let summary = run_experiment(&config)?;
    println!(
        "{:<18} {:>12} {:>10} {:>10} {:>10}",
        "policy", "mean", "stderr", "p_vs_best", "runtime_s"
    );
    for p in &summary.policies {
        println!(
            "{:<18} {:>12.4} {:>10.4} {:>10.4} {:>10.3}",
            p.policy_id, p.mean_utility, p.stderr, p.vs_best.p, p.median_runtime_s
        );
    }
    println!("best: {}", summary.best_policy);
    if let Some(dir) = &config.output_dir {
        println!("outputs written to {}", dir.display());
    }
    Ok(())
}

fn rayon_threads(threads: usize) -> Result<()> {
    das_core::harness::configure_thread_pool(threads).context("configuring thread pool")
}

fn gen(args: GenArgs) -> Result<()> {
    match args.generator.as_str() {
        "unit-square" | "unit_square" => {
            let inst = gen_unit_square(args.n, args.r_center, args.r_corner, args.k, args.seed)?;
            inst.save(&args.out)?;
            println!(
                "unit-square instance: n={} classes={} -> {}",
                inst.num_points(),
                inst.num_classes(),
                args.out.display()
            );
        }
        "hardness" => {
            let params = if args.paper_scaling {
                HardnessParams::paper_scaling(args.m)?
            } else {
                HardnessParams::desk(args.m)?
            };
            let (inst, annotation) = gen_hardness(&params, args.seed)?;
            inst.save(&args.out)?;
            std::fs::write(
                args.out.join("annotation.json"),
                serde_json::to_string_pretty(&annotation)?,
            )?;
            println!(
                "hardness instance: n={} classes={} budget={} -> {}",
                inst.num_points(),
                inst.num_classes(),
                params.budget(),
                args.out.display()
            );
        }
        "disks" => {
            let inst = gen_disks(args.n, args.classes, args.k, args.seed)?;
            inst.save(&args.out)?;
            println!(
                "disks instance: n={} classes={} -> {}",
                inst.num_points(),
                inst.num_classes(),
                args.out.display()
            );
        }
        other => bail!("unknown generator {other:?} (expected unit-square, hardness, or disks)"),
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let b_grid: Vec<usize> = args
        .batch_sizes
        .split(',')
        .map(|s| s.trim().parse::<usize>().context("parsing --batch-sizes"))
        .collect::<Result<_>>()?;
    let rows = approx_quality_bench(args.classes, &b_grid, args.repeats, args.seed)?;
    let csv = bench_rows_csv(&rows);
    match args.out {
        Some(path) => {
            std::fs::write(&path, csv)?;
            println!("wrote {}", path.display());
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn plots(args: PlotArgs) -> Result<()> {
    let groups = read_runs_jsonl(&args.runs)?;
    if groups.is_empty() {
        bail!("no runs in {}", args.runs.display());
    }
    let num_classes = groups[0].1[0].final_counts.len();
    let pair = match (&args.policy_a, &args.policy_b) {
        (Some(a), Some(b)) => Some((a.as_str(), b.as_str())),
        (None, None) => None,
        _ => bail!("--policy-a and --policy-b must be given together"),
    };
    emit_plot_data(&groups, num_classes, pair, &args.out)?;
    println!("plot CSVs written to {}", args.out.display());
    Ok(())
}
