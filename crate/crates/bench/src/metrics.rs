//! Per-episode rows and the summaries computed from them.
//!
//! Everything here is a pure function of [`EpisodeRow`]s, so `aggregate`
//! over the written CSV files reproduces the numbers a run printed.

use explore_core::control::TrainingOutcome;
use serde::{Deserialize, Serialize, Serializer};
use statrs::statistics::Statistics;

/// One line of a per-run CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRow {
    pub run_id: String,
    pub seed: u64,
    pub episode: usize,
    pub steps: usize,
    #[serde(rename = "return")]
    pub return_undiscounted: f64,
    pub kappa: f64,
    pub reached_goal: bool,
    /// Set on the first goal-reaching episode of the run only.
    pub first_goal_flag: bool,
    /// Models and counts were not updated during this episode.
    pub frozen: bool,
    /// The target-return stop latched after this episode.
    pub target_latched: bool,
}

pub fn rows_from_outcome(run_id: &str, seed: u64, outcome: &TrainingOutcome) -> Vec<EpisodeRow> {
    outcome
        .records
        .iter()
        .map(|r| EpisodeRow {
            run_id: run_id.to_string(),
            seed,
            episode: r.episode,
            steps: r.steps,
            return_undiscounted: r.return_undiscounted,
            kappa: r.kappa,
            reached_goal: r.reached_goal,
            first_goal_flag: outcome.first_goal_episode == Some(r.episode),
            frozen: r.frozen,
            target_latched: outcome.target_reached_at == Some(r.episode),
        })
        .collect()
}

/// Metrics of a single run. Episode counts are 1-based: a goal reached in
/// the very first episode counts as 1 episode to goal.
#[derive(Clone, Debug, PartialEq)]
pub struct RunMetrics {
    pub seed: u64,
    pub episodes: usize,
    pub total_steps: usize,
    pub episodes_to_first_goal: Option<usize>,
    pub steps_to_first_goal: Option<usize>,
    pub episodes_to_target: Option<usize>,
    /// Mean training return over the episodes after the target latched.
    pub post_target_return: Option<f64>,
}

impl RunMetrics {
    pub fn from_rows(rows: &[EpisodeRow]) -> RunMetrics {
        let first_goal = rows.iter().position(|r| r.reached_goal);
        let latch = rows.iter().position(|r| r.target_latched);
        let post: Vec<f64> = match latch {
            Some(i) => rows[i + 1..].iter().map(|r| r.return_undiscounted).collect(),
            None => Vec::new(),
        };
        RunMetrics {
            seed: rows.first().map_or(0, |r| r.seed),
            episodes: rows.len(),
            total_steps: rows.iter().map(|r| r.steps).sum(),
            episodes_to_first_goal: first_goal.map(|i| i + 1),
            steps_to_first_goal: first_goal.map(|i| rows[..=i].iter().map(|r| r.steps).sum()),
            episodes_to_target: latch.map(|i| i + 1),
            post_target_return: if post.is_empty() {
                None
            } else {
                Some(post.iter().mean())
            },
        }
    }

    /// Steps to first goal, or every step taken when the goal was never
    /// reached (a lower bound).
    pub fn steps_to_goal_or_total(&self) -> usize {
        self.steps_to_first_goal.unwrap_or(self.total_steps)
    }
}

/// Cross-seed statistics for one episode index.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpisodeAggregate {
    pub episode: usize,
    pub n_runs: usize,
    pub return_mean: f64,
    pub return_std: f64,
    pub steps_mean: f64,
    pub steps_std: f64,
    pub kappa_mean: f64,
    pub goal_rate: f64,
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.len() == 1 {
        (xs[0], 0.0)
    } else {
        (xs.mean(), xs.population_std_dev())
    }
}

/// Runs that ended early simply stop contributing to later episodes.
pub fn aggregate_episodes(runs: &[Vec<EpisodeRow>]) -> Vec<EpisodeAggregate> {
    let longest = runs.iter().map(Vec::len).max().unwrap_or(0);
    (0..longest)
        .map(|e| {
            let rows: Vec<&EpisodeRow> = runs.iter().filter_map(|r| r.get(e)).collect();
            let returns: Vec<f64> = rows.iter().map(|r| r.return_undiscounted).collect();
            let steps: Vec<f64> = rows.iter().map(|r| r.steps as f64).collect();
            let kappas: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
            let (return_mean, return_std) = mean_std(&returns);
            let (steps_mean, steps_std) = mean_std(&steps);
            let goals = rows.iter().filter(|r| r.reached_goal).count();
            EpisodeAggregate {
                episode: e,
                n_runs: rows.len(),
                return_mean,
                return_std,
                steps_mean,
                steps_std,
                kappa_mean: mean_std(&kappas).0,
                goal_rate: goals as f64 / rows.len() as f64,
            }
        })
        .collect()
}

pub const MISSING: &str = "--";

fn or_missing<S: Serializer>(v: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        Some(x) => s.serialize_f64(*x),
        None => s.serialize_str(MISSING),
    }
}

/// Experiment-level summary. Episode and step statistics to goal are over
/// successful runs only; statistics with no contributing run print as `--`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub n_runs: usize,
    pub success_rate: f64,
    #[serde(serialize_with = "or_missing")]
    pub episodes_to_goal_mean: Option<f64>,
    #[serde(serialize_with = "or_missing")]
    pub episodes_to_goal_std: Option<f64>,
    #[serde(serialize_with = "or_missing")]
    pub steps_to_goal_mean: Option<f64>,
    #[serde(serialize_with = "or_missing")]
    pub steps_to_goal_std: Option<f64>,
    pub times_target_reached: usize,
    #[serde(serialize_with = "or_missing")]
    pub episodes_to_target_mean: Option<f64>,
    #[serde(serialize_with = "or_missing")]
    pub post_target_return_mean: Option<f64>,
    #[serde(serialize_with = "or_missing")]
    pub post_target_return_std: Option<f64>,
}

fn stats(xs: &[f64]) -> (Option<f64>, Option<f64>) {
    if xs.is_empty() {
        (None, None)
    } else {
        let (m, s) = mean_std(xs);
        (Some(m), Some(s))
    }
}

pub fn summarize(experiment: &str, runs: &[Vec<EpisodeRow>]) -> Summary {
    let metrics: Vec<RunMetrics> = runs.iter().map(|r| RunMetrics::from_rows(r)).collect();
    let collect = |f: &dyn Fn(&RunMetrics) -> Option<f64>| -> Vec<f64> {
        metrics.iter().filter_map(f).collect()
    };
    let episodes = collect(&|m| m.episodes_to_first_goal.map(|e| e as f64));
    let steps = collect(&|m| m.steps_to_first_goal.map(|e| e as f64));
    let targets = collect(&|m| m.episodes_to_target.map(|e| e as f64));
    let post = collect(&|m| m.post_target_return);
    let (episodes_to_goal_mean, episodes_to_goal_std) = stats(&episodes);
    let (steps_to_goal_mean, steps_to_goal_std) = stats(&steps);
    let (post_target_return_mean, post_target_return_std) = stats(&post);
    Summary {
        experiment: experiment.to_string(),
        n_runs: runs.len(),
        success_rate: if runs.is_empty() {
            0.0
        } else {
            episodes.len() as f64 / runs.len() as f64
        },
        episodes_to_goal_mean,
        episodes_to_goal_std,
        steps_to_goal_mean,
        steps_to_goal_std,
        times_target_reached: targets.len(),
        episodes_to_target_mean: stats(&targets).0,
        post_target_return_mean,
        post_target_return_std,
    }
}
