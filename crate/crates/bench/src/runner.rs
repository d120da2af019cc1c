//! Seeded multi-run execution and the on-disk result layout.
//!
//! ```text
//! <out>/config.toml            resolved experiment config
//! <out>/runs/seed_0000.csv     per-episode rows of one run
//! <out>/checkpoints/seed_0000.json
//! <out>/episodes.csv           all runs, concatenated in seed order
//! <out>/aggregate.csv          per-episode mean / std across runs
//! <out>/summary.csv            one row of experiment-level metrics
//! ```

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use explore_core::control::{run_training, TrainingOptions, TrainingOutcome};
use explore_core::envs::EnvConfig;
use explore_core::{run_frozen_episode, EpisodeLog, RunRngs};
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;

use crate::agent::AnyAgent;
use crate::checkpoint::Checkpoint;
use crate::config::ExperimentConfig;
use crate::error::{BenchError, Result};
use crate::metrics::{aggregate_episodes, summarize, EpisodeAggregate, EpisodeRow, RunMetrics, Summary};

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "EXPLORE_BENCH_OUT";
pub const DEFAULT_OUT_ROOT: &str = "results";

pub struct RunResult {
    pub seed: u64,
    pub run_id: String,
    pub rows: Vec<EpisodeRow>,
    pub outcome: TrainingOutcome,
    pub agent: AnyAgent,
    pub wall_time: Duration,
}

impl RunResult {
    pub fn metrics(&self) -> RunMetrics {
        RunMetrics::from_rows(&self.rows)
    }
}

pub fn run_id(experiment: &str, seed: u64) -> String {
    format!("{experiment}-s{seed}")
}

/// One training run. `on_episode` sees every training episode log, which
/// carries per-step diagnostics the CSV rows do not.
pub fn run_seed(
    config: &ExperimentConfig,
    seed: u64,
    on_episode: impl FnMut(&EpisodeLog),
) -> Result<RunResult> {
    let start = Instant::now();
    let build = |env: &EnvConfig| {
        env.build_scaled(config.reward_scale)
            .map_err(|e| BenchError::Config(e.to_string()))
    };
    let mut env = build(&config.env)?;
    let mut eval_env = build(&config.env)?;
    let mut rngs = RunRngs::new(seed);
    let mut agent = config
        .agent
        .build(env.spec(), seed, &mut rngs.train.agent)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let options = TrainingOptions {
        n_episodes: config.n_episodes,
        stop_at_first_goal: config.stop_at_first_goal,
    };
    let outcome = run_training(
        &mut *env,
        &mut *eval_env,
        &mut agent,
        &config.schedule,
        &options,
        &mut rngs,
        on_episode,
    )
    .map_err(|e| BenchError::Runtime(format!("seed {seed}: {e}")))?;
    let run_id = run_id(&config.name, seed);
    let rows = crate::metrics::rows_from_outcome(&run_id, seed, &outcome);
    Ok(RunResult {
        seed,
        run_id,
        rows,
        outcome,
        agent,
        wall_time: start.elapsed(),
    })
}

pub struct ExperimentReport {
    pub out_dir: PathBuf,
    pub metrics: Vec<RunMetrics>,
    pub aggregate: Vec<EpisodeAggregate>,
    pub summary: Summary,
}

/// Where results go: an explicit directory wins, then the config's
/// `out_dir`, then `$EXPLORE_BENCH_OUT/<name>`, then `results/<name>`.
pub fn resolve_out_dir(config: &ExperimentConfig, explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    if let Some(p) = &config.out_dir {
        return p.clone();
    }
    let root = std::env::var_os(OUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_ROOT));
    root.join(&config.name)
}

fn seed_file(dir: &Path, seed: u64, ext: &str) -> PathBuf {
    dir.join(format!("seed_{seed:04}.{ext}"))
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(BenchError::io(path))?;
    Ok(())
}

fn fresh_dir(path: &Path) -> Result<()> {
    if path.exists() {
        fs::remove_dir_all(path).map_err(BenchError::io(path))?;
    }
    fs::create_dir_all(path).map_err(BenchError::io(path))
}

/// Run seeds `0..n_seeds` on at most `workers` threads.
///
/// Each run writes its own CSV (and checkpoint) as soon as it finishes, so a
/// failing seed leaves the completed runs on disk. Merged outputs are only
/// written when every run succeeds.
pub fn run_experiment(
    config: &ExperimentConfig,
    workers: Option<usize>,
    out_dir: &Path,
) -> Result<ExperimentReport> {
    config.validate()?;
    let workers = workers.unwrap_or_else(|| {
        std::thread::available_parallelism().map_or(1, |n| n.get())
    });
    if workers == 0 {
        return Err(BenchError::Config("workers must be at least 1".into()));
    }
    let runs_dir = out_dir.join("runs");
    let ckpt_dir = out_dir.join("checkpoints");
    fresh_dir(&runs_dir)?;
    if config.save_checkpoints {
        fresh_dir(&ckpt_dir)?;
    }
    let config_path = out_dir.join("config.toml");
    fs::write(&config_path, config.to_toml()).map_err(BenchError::io(&config_path))?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| BenchError::Runtime(e.to_string()))?;
    info!(
        "{}: {} seeds x {} episodes on {workers} workers",
        config.name, config.n_seeds, config.n_episodes
    );
    let results: Vec<Result<(Vec<EpisodeRow>, RunMetrics)>> = pool.install(|| {
        (0..config.n_seeds as u64)
            .into_par_iter()
            .map(|seed| {
                let run = run_seed(config, seed, |_| {})?;
                write_csv(&seed_file(&runs_dir, seed, "csv"), &run.rows)?;
                if config.save_checkpoints {
                    Checkpoint::new(&config.name, seed, config.reward_scale, config.env.clone(), &run.agent)
                        .save(&seed_file(&ckpt_dir, seed, "json"))?;
                }
                let metrics = run.metrics();
                info!(
                    "{}: seed {seed} done in {:.2?}, first goal {:?}",
                    config.name, run.wall_time, metrics.episodes_to_first_goal
                );
                Ok((run.rows, metrics))
            })
            .collect()
    });

    let mut runs = Vec::with_capacity(results.len());
    let mut metrics = Vec::with_capacity(results.len());
    let mut first_error = None;
    for (seed, r) in results.into_iter().enumerate() {
        match r {
            Ok((rows, m)) => {
                runs.push(rows);
                metrics.push(m);
            }
            Err(e) => {
                warn!("{}: seed {seed} failed: {e}", config.name);
                first_error.get_or_insert(e);
            }
        }
    }
    if let Some(e) = first_error {
        return Err(e);
    }
    let merged: Vec<&EpisodeRow> = runs.iter().flatten().collect();
    let merged_path = out_dir.join("episodes.csv");
    write_csv(&merged_path, &merged)?;
    let (aggregate, summary) = write_aggregates(out_dir, &config.name, &runs)?;
    Ok(ExperimentReport {
        out_dir: out_dir.to_path_buf(),
        metrics,
        aggregate,
        summary,
    })
}

fn write_aggregates(
    out_dir: &Path,
    experiment: &str,
    runs: &[Vec<EpisodeRow>],
) -> Result<(Vec<EpisodeAggregate>, Summary)> {
    let aggregate = aggregate_episodes(runs);
    let summary = summarize(experiment, runs);
    write_csv(&out_dir.join("aggregate.csv"), &aggregate)?;
    write_csv(&out_dir.join("summary.csv"), std::slice::from_ref(&summary))?;
    Ok((aggregate, summary))
}

/// Read the per-run CSVs of a finished experiment, ordered by seed.
pub fn read_runs(dir: &Path) -> Result<Vec<Vec<EpisodeRow>>> {
    let runs_dir = dir.join("runs");
    let entries = fs::read_dir(&runs_dir)
        .map_err(|e| BenchError::Config(format!("{}: {e}", runs_dir.display())))?;
    let mut runs = Vec::new();
    for entry in entries {
        let path = entry.map_err(BenchError::io(&runs_dir))?.path();
        if path.extension().is_none_or(|e| e != "csv") {
            continue;
        }
        let mut reader = csv::Reader::from_path(&path)?;
        let rows: Vec<EpisodeRow> = reader
            .deserialize()
            .collect::<std::result::Result<_, _>>()
            .map_err(|e| BenchError::Config(format!("{}: {e}", path.display())))?;
        if !rows.is_empty() {
            runs.push(rows);
        }
    }
    if runs.is_empty() {
        return Err(BenchError::Config(format!("no run CSVs under {}", runs_dir.display())));
    }
    runs.sort_by_key(|r| r[0].seed);
    Ok(runs)
}

/// Recompute `aggregate.csv` and `summary.csv` from the per-run files.
pub fn aggregate_dir(dir: &Path) -> Result<Summary> {
    let config = ExperimentConfig::load(&dir.join("config.toml"))?;
    let runs = read_runs(dir)?;
    Ok(write_aggregates(dir, &config.name, &runs)?.1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EvalEpisode {
    pub episode: usize,
    pub steps: usize,
    #[serde(rename = "return")]
    pub return_undiscounted: f64,
    pub reached_goal: bool,
}

/// Pure-exploitation episodes with a checkpointed agent. The checkpoint's
/// own environment parameters are reused when `env_name` matches them.
pub fn evaluate(
    checkpoint: &Checkpoint,
    env_name: &str,
    episodes: usize,
    seed: u64,
) -> Result<Vec<EvalEpisode>> {
    let (env_config, scale) = if checkpoint.env.name() == env_name {
        (checkpoint.env.clone(), checkpoint.reward_scale)
    } else {
        let c = EnvConfig::by_name(env_name)
            .ok_or_else(|| BenchError::Config(format!("unknown environment `{env_name}`")))?;
        (c, 1.0)
    };
    let mut env = env_config
        .build_scaled(scale)
        .map_err(|e| BenchError::Config(e.to_string()))?;
    let agent = checkpoint.restore_agent()?;
    if !agent.fits(env.spec()) {
        return Err(BenchError::Config(format!(
            "checkpoint agent does not fit environment `{env_name}`"
        )));
    }
    let mut rngs = RunRngs::new(seed);
    (0..episodes)
        .map(|episode| {
            let log = run_frozen_episode(&mut *env, &agent, &mut rngs.eval)
                .map_err(|e| BenchError::Runtime(e.to_string()))?;
            Ok(EvalEpisode {
                episode,
                steps: log.steps,
                return_undiscounted: log.return_undiscounted,
                reached_goal: log.reached_goal,
            })
        })
        .collect()
}
