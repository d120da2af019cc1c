use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use explore_bench::runner::{aggregate_dir, evaluate, resolve_out_dir, run_experiment};
use explore_bench::{BenchError, Checkpoint, ExperimentConfig, Summary};

/// Seeded exploration experiments: run, re-aggregate, and evaluate checkpoints.
#[derive(Parser)]
#[command(name = "explore-bench", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed and write CSVs, checkpoints and summaries.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Override the config's seed count.
        #[arg(long)]
        seeds: Option<usize>,
        /// Worker threads (default: all cores).
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: $EXPLORE_BENCH_OUT/<name> or results/<name>).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute aggregate.csv and summary.csv from a run directory.
    Aggregate {
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run pure-exploitation episodes with a saved agent.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        env: String,
        #[arg(long)]
        episodes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn fmt(v: Option<f64>) -> String {
    v.map_or_else(|| "--".to_string(), |x| format!("{x:.3}"))
}

fn print_summary(s: &Summary) {
    println!(
        "{}: runs {} success {:.2} episodes-to-goal {} ({}) steps-to-goal {} target reached {} post-target return {}",
        s.experiment,
        s.n_runs,
        s.success_rate,
        fmt(s.episodes_to_goal_mean),
        fmt(s.episodes_to_goal_std),
        fmt(s.steps_to_goal_mean),
        s.times_target_reached,
        fmt(s.post_target_return_mean),
    );
}

fn execute(cli: Cli) -> Result<(), BenchError> {
    match cli.command {
        Command::Run {
            config,
            seeds,
            workers,
            out,
        } => {
            let mut config = ExperimentConfig::load(&config)?;
            if let Some(n) = seeds {
                config.n_seeds = n;
            }
            let out_dir = resolve_out_dir(&config, out.as_deref());
            std::fs::create_dir_all(&out_dir).map_err(|source| BenchError::Io {
                path: out_dir.clone(),
                source,
            })?;
            let report = run_experiment(&config, workers, &out_dir)?;
            print_summary(&report.summary);
            println!("results in {}", report.out_dir.display());
        }
        Command::Aggregate { input } => print_summary(&aggregate_dir(&input)?),
        Command::Eval {
            checkpoint,
            env,
            episodes,
            seed,
        } => {
            let ckpt = Checkpoint::load(&checkpoint)?;
            let results = evaluate(&ckpt, &env, episodes, seed)?;
            let mut w = csv::Writer::from_writer(std::io::stdout());
            for r in &results {
                w.serialize(r)
                    .map_err(|e| BenchError::Runtime(e.to_string()))?;
            }
            w.flush().map_err(|e| BenchError::Runtime(e.to_string()))?;
            let n = results.len().max(1) as f64;
            let mean: f64 = results.iter().map(|r| r.return_undiscounted).sum::<f64>() / n;
            let goals = results.iter().filter(|r| r.reached_goal).count();
            eprintln!("mean return {mean:.4}, goal reached in {goals}/{}", results.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
