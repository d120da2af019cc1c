//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use explore_bench::metrics::RunMetrics;
use explore_bench::{AnyAgent, ExperimentConfig, RunResult};
use explore_core::bayes::PosteriorState;
use explore_core::control::{run_training, KappaSchedule, TrainingOptions};
use explore_core::emuq::EmuqAgent;
use explore_core::envs::EnvConfig;
use explore_core::features::{RffMap, SamplingScheme};
use explore_core::tabular::{argmax_first, ExplorationValuesAgent, TabularParams};
use explore_core::{Action, EpisodeLog, RunRngs, State, StepInfo};
use nalgebra::{DMatrix, DVector};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

struct Check {
    id: u32,
    name: &'static str,
    limit: Duration,
}

struct Verdict {
    pass: bool,
    detail: String,
}

fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load(name: &str) -> ExperimentConfig {
    ExperimentConfig::load(&configs_dir().join(format!("{name}.toml"))).expect("shipped config")
}

/// Every EMU-Q step diagnostic seen by the criteria that train EMU-Q.
#[derive(Default)]
struct StepAudit {
    steps: usize,
    reward_violations: usize,
    variance_violations: usize,
}

impl StepAudit {
    fn absorb(&mut self, infos: &[StepInfo]) {
        for info in infos {
            let (Some(r), Some(v), Some(bound)) =
                (info.exploration_reward, info.variance, info.variance_bound)
            else {
                continue;
            };
            self.steps += 1;
            if !(-bound..=0.0).contains(&r) {
                self.reward_violations += 1;
            }
            if v > bound {
                self.variance_violations += 1;
            }
        }
    }

    fn merge(&mut self, other: StepAudit) {
        self.steps += other.steps;
        self.reward_violations += other.reward_violations;
        self.variance_violations += other.variance_violations;
    }
}

/// Runs all seeds of `config` in parallel, returning results in seed order
/// plus the audit of their step diagnostics.
fn run_all(config: &ExperimentConfig) -> (Vec<RunResult>, StepAudit) {
    let out: Vec<(RunResult, StepAudit)> = (0..config.n_seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let mut audit = StepAudit::default();
            let run = explore_bench::run_seed(config, seed, |log: &EpisodeLog| {
                audit.absorb(&log.step_info)
            })
            .expect("run succeeds");
            (run, audit)
        })
        .collect();
    let mut audit = StepAudit::default();
    let mut runs = Vec::new();
    for (r, a) in out {
        audit.merge(a);
        runs.push(r);
    }
    (runs, audit)
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn mean_steps_to_goal(runs: &[RunResult]) -> f64 {
    mean(&runs.iter().map(|r| r.metrics().steps_to_goal_or_total() as f64).collect::<Vec<_>>())
}

fn posterior_oracle() -> Verdict {
    let (n, m, alpha, beta) = (500, 50, 0.1, 1.0);
    let map = RffMap::with_features(&[0.5; 3], m, SamplingScheme::MonteCarlo, 1).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut phi = Array2::zeros((n, m));
    for mut row in phi.rows_mut() {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        row.assign(&map.embed(&x).unwrap());
    }
    let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut post = PosteriorState::new(alpha, beta, m).unwrap();
    for (row, &r) in phi.rows().into_iter().zip(&rewards) {
        post.absorb_step(row, r, 0.0, None, 0.0).unwrap();
    }
    let p = DMatrix::from_fn(n, m, |i, j| phi[[i, j]]);
    let direct = (DMatrix::identity(m, m) * alpha + p.transpose() * &p * beta)
        .cholesky()
        .unwrap()
        .inverse();
    let ridge = &direct * p.transpose() * DVector::from_vec(rewards) * beta;
    let s = post.covariance();
    let ds = (0..m * m)
        .map(|k| (s[[k / m, k % m]] - direct[(k / m, k % m)]).abs())
        .fold(0.0, f64::max);
    let dm = (0..m).map(|i| (post.mean_q()[i] - ridge[i]).abs()).fold(0.0, f64::max);
    Verdict {
        pass: ds <= 1e-8 && dm <= 1e-6,
        detail: format!("max|S-S*| {ds:.2e} (tol 1e-8), max|m_Q-ridge| {dm:.2e} (tol 1e-6)"),
    }
}

fn rff_error(n_features: usize, scheme: SamplingScheme, seed: u64, pairs: &[(Vec<f64>, Vec<f64>)]) -> f64 {
    let sigma = 0.3;
    let map = RffMap::with_features(&[sigma; 3], n_features, scheme, seed).unwrap();
    let errs: Vec<f64> = pairs
        .iter()
        .map(|(x, y)| {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum();
            let exact = (-d2 / (2.0 * sigma * sigma)).exp();
            let approx = map.embed(x).unwrap().dot(&map.embed(y).unwrap());
            (approx - exact).abs()
        })
        .collect();
    mean(&errs)
}

fn rff_approximation() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let pairs: Vec<(Vec<f64>, Vec<f64>)> = (0..200)
        .map(|_| {
            let x: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            let y: Vec<f64> = (0..3).map(|_| rng.random::<f64>()).collect();
            (x, y)
        })
        .collect();
    let avg = |m: usize, scheme| mean(&(0..10).map(|s| rff_error(m, scheme, s, &pairs)).collect::<Vec<_>>());
    let mc: Vec<f64> = [100, 400, 2000].iter().map(|&m| avg(m, SamplingScheme::MonteCarlo)).collect();
    let qmc400 = avg(400, SamplingScheme::QuasiRandom);
    let single = rff_error(2000, SamplingScheme::MonteCarlo, 0, &pairs);
    let decreasing = mc[0] > mc[1] && mc[1] > mc[2];
    Verdict {
        pass: single <= 0.05 && decreasing && qmc400 <= mc[1],
        detail: format!(
            "M=2000 err {single:.4} (<= 0.05); 10-seed MC err M=100/400/2000: {:.4}/{:.4}/{:.4} (strictly decreasing); QMC@400 {qmc400:.4} <= MC@400 {:.4}",
            mc[0], mc[1], mc[2], mc[1]
        ),
    }
}

fn chain_scaling(audit: &mut StepAudit) -> Verdict {
    let mut parts = Vec::new();
    let mut pass = true;
    let mut emuq40 = 0.0;
    for n in [10usize, 20, 40] {
        let (runs, a) = run_all(&load(&format!("chain_n{n}_emuq")));
        audit.merge(a);
        let m = mean_steps_to_goal(&runs);
        pass &= m <= 60.0 * n as f64;
        parts.push(format!("N={n}: EMU-Q {m:.1} <= {}", 60 * n));
        emuq40 = m;
    }
    let (eg, _) = run_all(&load("chain_n40_egreedy"));
    let eg40 = mean_steps_to_goal(&eg);
    let ratio = eg40 / emuq40;
    pass &= ratio >= 5.0;
    parts.push(format!("eps-greedy N=40 {eg40:.0} = {ratio:.1}x EMU-Q (>= 5x)"));
    Verdict {
        pass,
        detail: parts.join("; "),
    }
}

fn semi_sparse(audit: &mut StepAudit) -> Verdict {
    let mut means = Vec::new();
    for tag in ["p0", "p05", "p1"] {
        let (runs, a) = run_all(&load(&format!("chain_semisparse_{tag}_emuq")));
        audit.merge(a);
        means.push(mean_steps_to_goal(&runs));
    }
    let max = means.iter().cloned().fold(f64::MIN, f64::max);
    let min = means.iter().cloned().fold(f64::MAX, f64::min);
    Verdict {
        pass: max / min <= 3.0,
        detail: format!(
            "mean steps p=0/0.5/1: {:.1}/{:.1}/{:.1}, max/min {:.2} (<= 3)",
            means[0],
            means[1],
            means[2],
            max / min
        ),
    }
}

fn taxi_target() -> Verdict {
    let (ev, _) = run_all(&load("taxi_target_explvalues"));
    let (add, _) = run_all(&load("taxi_target_additive"));
    let ev_m: Vec<RunMetrics> = ev.iter().map(|r| r.metrics()).collect();
    let add_m: Vec<RunMetrics> = add.iter().map(|r| r.metrics()).collect();
    let reached = ev_m.iter().filter(|m| m.episodes_to_target.is_some()).count();
    let ev_post: Vec<f64> = ev_m.iter().filter_map(|m| m.post_target_return).collect();
    let ev_post_mean = if ev_post.is_empty() { f64::NAN } else { mean(&ev_post) };
    // A pair only counts as "lower" when both runs latched; an additive run
    // that never reaches the target counts against the criterion.
    let lower = ev_m
        .iter()
        .zip(&add_m)
        .filter(|(e, a)| matches!((e.post_target_return, a.post_target_return), (Some(x), Some(y)) if y < x))
        .count();
    let add_reached = add_m.iter().filter(|m| m.episodes_to_target.is_some()).count();
    let add_post: Vec<f64> = add_m.iter().filter_map(|m| m.post_target_return).collect();
    let n = ev.len();
    let ep_ev = mean(&ev_m.iter().filter_map(|m| m.episodes_to_target.map(|e| e as f64)).collect::<Vec<_>>());
    Verdict {
        pass: reached * 5 >= n * 4 && ev_post_mean >= 0.0 && lower * 5 >= n * 4,
        detail: format!(
            "explvalues reached {reached}/{n} (>= 80%) after {ep_ev:.0} episodes, post-target {ev_post_mean:.3} (>= 0); additive reached {add_reached}/{n}, post-target {:.3}, lower in {lower}/{n} pairs (>= 80%)",
            if add_post.is_empty() { f64::NAN } else { mean(&add_post) }
        ),
    }
}

fn cliff_budget() -> Verdict {
    let config = load("cliff_budget30_explvalues");
    let budget = match config.schedule {
        KappaSchedule::BudgetStop { budget, .. } => budget,
        _ => panic!("cliff_budget30 must use a budget stop"),
    };
    let per_seed: Vec<(Vec<f64>, usize, usize)> = (0..config.n_seeds as u64)
        .into_par_iter()
        .map(|seed| {
            let mut post_stop: Vec<(State, Action)> = Vec::new();
            let mut episode = 0;
            let run = explore_bench::run_seed(&config, seed, |log: &EpisodeLog| {
                if episode >= budget {
                    post_stop.extend(log.transitions.iter().map(|t| (t.state.clone(), t.action.clone())));
                }
                episode += 1;
            })
            .unwrap();
            let AnyAgent::Explvalues(agent) = &run.agent else {
                panic!("cliff_budget30 must use the explvalues agent")
            };
            let q = agent.q();
            let mismatches = post_stop
                .iter()
                .filter(|(s, a)| {
                    let s = s.index.unwrap();
                    let greedy = argmax_first(q.n_actions(), |b| q.get(s, b).unwrap());
                    *a != Action::Discrete(greedy)
                })
                .count();
            let returns = run.rows.iter().map(|r| r.return_undiscounted).collect();
            (returns, mismatches, post_stop.len())
        })
        .collect();
    let n_ep = config.n_episodes;
    let curve: Vec<f64> = (0..n_ep)
        .map(|e| mean(&per_seed.iter().map(|(r, _, _)| r[e]).collect::<Vec<_>>()))
        .collect();
    let pre_best = (0..=budget - 5)
        .map(|i| mean(&curve[i..i + 5]))
        .fold(f64::MIN, f64::max);
    let post = mean(&curve[budget..budget + 20]);
    let mismatches: usize = per_seed.iter().map(|(_, m, _)| m).sum();
    let checked: usize = per_seed.iter().map(|(_, _, n)| n).sum();
    let seeds_ok = per_seed
        .iter()
        .filter(|(r, _, _)| {
            let best = (0..=budget - 5).map(|i| mean(&r[i..i + 5])).fold(f64::MIN, f64::max);
            mean(&r[budget..budget + 20]) >= best - 0.1
        })
        .count();
    Verdict {
        pass: post >= pre_best - 0.1 && mismatches == 0 && checked > 0,
        detail: format!(
            "{}-run mean curve: post-stop 20-ep mean {post:.3} >= pre-stop best 5-ep mean {pre_best:.3} - 0.1; greedy mismatches {mismatches}/{checked} post-stop actions (== 0); per-seed pass {seeds_ok}/{}",
            config.n_seeds, config.n_seeds
        ),
    }
}

fn mountain_car(audit: &mut StepAudit) -> Verdict {
    let (runs, a) = run_all(&load("mountain_car_emuq"));
    audit.merge(a);
    let (ablation, a) = run_all(&load("mountain_car_kappa0"));
    audit.merge(a);
    let found = |rs: &[RunResult]| {
        rs.iter()
            .filter(|r| r.metrics().episodes_to_first_goal.is_some_and(|e| e <= 10))
            .count()
    };
    let mut eps: Vec<usize> = runs
        .iter()
        .map(|r| r.metrics().episodes_to_first_goal.unwrap_or(usize::MAX))
        .collect();
    eps.sort_unstable();
    let median = if eps.len() % 2 == 1 {
        eps[eps.len() / 2] as f64
    } else {
        let (a, b) = (eps[eps.len() / 2 - 1], eps[eps.len() / 2]);
        if b == usize::MAX {
            f64::INFINITY
        } else {
            (a + b) as f64 / 2.0
        }
    };
    let (hit, ctrl) = (found(&runs), found(&ablation));
    Verdict {
        pass: hit >= 8 && median <= 6.0 && ctrl <= 2,
        detail: format!(
            "EMU-Q goal within 10 episodes {hit}/10 (>= 8), median episodes-to-goal {median} (<= 6); kappa=0 {ctrl}/10 (<= 2)"
        ),
    }
}

fn variance_invariants(audit: &StepAudit) -> Verdict {
    let mut fresh_nonzero = 0;
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for name in ["chain_n10_emuq", "chain_n40_emuq", "chain_semisparse_p0_emuq", "mountain_car_emuq"] {
        let config = load(name);
        let explore_bench::AgentConfig::Emuq(ec) = &config.agent else {
            panic!("{name} must be an EMU-Q config")
        };
        let env = config.env.build().unwrap();
        let mut rngs = RunRngs::new(0);
        let agent = EmuqAgent::new(env.spec(), ec.clone(), 0, &mut rngs.train.agent).unwrap();
        for _ in 0..50 {
            let s: Vec<f64> = (0..env.spec().state_dim).map(|_| rng.random()).collect();
            if agent.exploration_reward(&State::continuous(s)).unwrap() != 0.0 {
                fresh_nonzero += 1;
            }
        }
    }
    Verdict {
        pass: audit.steps > 0
            && audit.reward_violations == 0
            && audit.variance_violations == 0
            && fresh_nonzero == 0,
        detail: format!(
            "{} EMU-Q steps: r_e outside [-Vmax, 0] {}, variance > Vmax {}; fresh-posterior r_e != 0 in {fresh_nonzero}/200 states",
            audit.steps, audit.reward_violations, audit.variance_violations
        ),
    }
}

fn schedules() -> Verdict {
    let mut failures = Vec::new();
    for c in [0.0, 1e-3, 0.1, 1.0, 10.0, 1e5] {
        let s = KappaSchedule::Decay { c, value: None };
        if s.kappa_at(0, 1.0, false) != 1.0 {
            failures.push(format!("decay c={c}: kappa(0) != 1"));
        }
        for t in 0..200 {
            let expect = 1.0 / (1.0 + c * t as f64);
            if (s.kappa_at(t, 1.0, false) - expect).abs() > 1e-15 {
                failures.push(format!("decay c={c} t={t}"));
            }
        }
    }
    let k = KappaSchedule::Decay { c: 1e5, value: None }.kappa_at(10, 1.0, false);
    if (k - 1e-6).abs() > 1e-9 {
        failures.push(format!("decay c=1e5 t=10 gave {k}"));
    }
    for b in [0usize, 1, 30, 100] {
        let s = KappaSchedule::BudgetStop { budget: b, value: None };
        for e in 0..b + 50 {
            let c = s.control(e, 1.0, false);
            let ok = if e < b { c.kappa == 1.0 && c.learning } else { c.kappa == 0.0 && !c.learning };
            if !ok {
                failures.push(format!("budget {b} episode {e}"));
            }
        }
    }
    // Latch permanence over a real run.
    let cfg = EnvConfig::by_name("taxi").unwrap();
    let (mut env, mut eval_env) = (cfg.build().unwrap(), cfg.build().unwrap());
    let mut agent = ExplorationValuesAgent::new(500, 6, TabularParams::default()).unwrap();
    let schedule = KappaSchedule::TargetStop {
        target: 0.1,
        n_consecutive: 5,
        value: None,
    };
    let options = TrainingOptions {
        n_episodes: 400,
        stop_at_first_goal: false,
    };
    let out = run_training(&mut *env, &mut *eval_env, &mut agent, &schedule, &options, &mut RunRngs::new(0), |_| {})
        .unwrap();
    match out.target_reached_at {
        Some(at) => {
            if out.records.iter().filter(|r| r.episode > at).any(|r| r.kappa != 0.0 || !r.frozen) {
                failures.push("target stop unlatched".into());
            }
        }
        None => failures.push("target never latched in the latch run".into()),
    }
    Verdict {
        pass: failures.is_empty(),
        detail: if failures.is_empty() {
            "decay, budget and latch rules hold on every checked episode".into()
        } else {
            failures.join("; ")
        },
    }
}

fn csv_bytes(dir: &Path) -> Vec<(PathBuf, Vec<u8>)> {
    let mut files = Vec::new();
    for sub in [dir.to_path_buf(), dir.join("runs")] {
        let mut entries: Vec<PathBuf> = std::fs::read_dir(&sub)
            .unwrap()
            .map(|e| e.unwrap().path())
            .filter(|p| p.extension().is_some_and(|e| e == "csv"))
            .collect();
        entries.sort();
        for p in entries {
            let bytes = std::fs::read(&p).unwrap();
            files.push((p.strip_prefix(dir).unwrap().to_path_buf(), bytes));
        }
    }
    files
}

/// Every shipped config, rerun with capped seeds and episodes.
fn determinism() -> Verdict {
    let mut names: Vec<String> = std::fs::read_dir(configs_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "toml"))
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    names.sort();
    let tmp = tempfile::tempdir().unwrap();
    let differing: Vec<String> = names
        .par_iter()
        .filter(|name| {
            let mut config = load(name);
            config.n_seeds = config.n_seeds.min(2);
            config.n_episodes = config.n_episodes.min(20);
            config.save_checkpoints = false;
            let a = tmp.path().join(format!("{name}-a"));
            let b = tmp.path().join(format!("{name}-b"));
            explore_bench::run_experiment(&config, Some(2), &a).unwrap();
            explore_bench::run_experiment(&config, Some(1), &b).unwrap();
            csv_bytes(&a) != csv_bytes(&b)
        })
        .cloned()
        .collect();
    Verdict {
        pass: differing.is_empty(),
        detail: format!(
            "{} configs rerun (<= 2 seeds, <= 20 episodes, 1 vs 2 workers): {} differ{}",
            names.len(),
            differing.len(),
            if differing.is_empty() { String::new() } else { format!(" ({})", differing.join(", ")) }
        ),
    }
}

fn main() {
    let mut audit = StepAudit::default();
    let mut failed = 0;
    let checks: Vec<(Check, Box<dyn FnMut(&mut StepAudit) -> Verdict>)> = vec![
        (
            Check { id: 1, name: "posterior oracle", limit: Duration::from_secs(5) },
            Box::new(|_| posterior_oracle()),
        ),
        (
            Check { id: 2, name: "RFF approximation", limit: Duration::from_secs(30) },
            Box::new(|_| rff_approximation()),
        ),
        (
            Check { id: 3, name: "chain scaling", limit: Duration::from_secs(300) },
            Box::new(chain_scaling),
        ),
        (
            Check { id: 4, name: "semi-sparse insensitivity", limit: Duration::from_secs(300) },
            Box::new(semi_sparse),
        ),
        (
            Check { id: 5, name: "taxi target-stop contrast", limit: Duration::from_secs(600) },
            Box::new(|_| taxi_target()),
        ),
        (
            Check { id: 6, name: "cliff budget-stop purity", limit: Duration::from_secs(120) },
            Box::new(|_| cliff_budget()),
        ),
        (
            Check { id: 7, name: "goal-only mountain car", limit: Duration::from_secs(600) },
            Box::new(mountain_car),
        ),
        (
            Check { id: 8, name: "variance-reward invariants", limit: Duration::from_secs(60) },
            Box::new(|a| variance_invariants(a)),
        ),
        (
            Check { id: 9, name: "kappa schedules", limit: Duration::from_secs(1) },
            Box::new(|_| schedules()),
        ),
        (
            Check { id: 10, name: "determinism", limit: Duration::from_secs(600) },
            Box::new(|_| determinism()),
        ),
    ];
    for (check, mut run) in checks {
        let start = Instant::now();
        let verdict = run(&mut audit);
        let elapsed = start.elapsed();
        let pass = verdict.pass && elapsed <= check.limit;
        if !pass {
            failed += 1;
        }
        println!(
            "[{}] {:>2} {}: {} | {:.1}s (limit {}s)",
            if pass { "PASS" } else { "FAIL" },
            check.id,
            check.name,
            verdict.detail,
            elapsed.as_secs_f64(),
            check.limit.as_secs()
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
