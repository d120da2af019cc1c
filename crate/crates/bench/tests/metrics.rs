use explore_bench::metrics::{aggregate_episodes, summarize, EpisodeRow, RunMetrics};
use proptest::prelude::*;

fn rows(seed: u64, returns: &[f64], goals: &[bool]) -> Vec<EpisodeRow> {
    returns
        .iter()
        .zip(goals)
        .enumerate()
        .map(|(e, (&r, &g))| EpisodeRow {
            run_id: format!("p-s{seed}"),
            seed,
            episode: e,
            steps: 1 + e % 7,
            return_undiscounted: r,
            kappa: 0.5,
            reached_goal: g,
            first_goal_flag: false,
            frozen: e % 3 == 0,
            target_latched: e == 2,
        })
        .collect()
}

fn run_strategy() -> impl Strategy<Value = Vec<Vec<EpisodeRow>>> {
    prop::collection::vec(
        prop::collection::vec((-100.0f64..100.0, any::<bool>()), 1..12),
        1..6,
    )
    .prop_map(|runs| {
        runs.into_iter()
            .enumerate()
            .map(|(s, eps)| {
                let (r, g): (Vec<f64>, Vec<bool>) = eps.into_iter().unzip();
                rows(s as u64, &r, &g)
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn mean_of_constant_returns_is_that_constant(c in -1e3f64..1e3, n_runs in 1usize..20, len in 1usize..10) {
        let runs: Vec<Vec<EpisodeRow>> =
            (0..n_runs).map(|s| rows(s as u64, &vec![c; len], &vec![false; len])).collect();
        for a in aggregate_episodes(&runs) {
            prop_assert!((a.return_mean - c).abs() <= 1e-12 * c.abs().max(1.0));
            prop_assert!(a.return_std <= 1e-9 * c.abs().max(1.0));
            prop_assert_eq!(a.n_runs, n_runs);
        }
    }

    #[test]
    fn success_rate_counts_runs_with_a_goal(runs in run_strategy()) {
        let s = summarize("p", &runs);
        let hit = runs.iter().filter(|r| r.iter().any(|e| e.reached_goal)).count();
        prop_assert_eq!(s.success_rate, hit as f64 / runs.len() as f64);
        prop_assert_eq!(s.episodes_to_goal_mean.is_none(), hit == 0);
        for r in &runs {
            let m = RunMetrics::from_rows(r);
            let first = r.iter().position(|e| e.reached_goal);
            prop_assert_eq!(m.episodes_to_first_goal, first.map(|i| i + 1));
        }
    }

    #[test]
    fn summaries_survive_a_csv_round_trip(runs in run_strategy()) {
        let mut reread = Vec::new();
        for r in &runs {
            let mut w = csv::Writer::from_writer(vec![]);
            for row in r {
                w.serialize(row).unwrap();
            }
            let bytes = w.into_inner().unwrap();
            let back: Vec<EpisodeRow> = csv::Reader::from_reader(bytes.as_slice())
                .deserialize()
                .collect::<Result<_, _>>()
                .unwrap();
            reread.push(back);
        }
        prop_assert_eq!(&reread, &runs);
        prop_assert_eq!(summarize("p", &reread), summarize("p", &runs));
        prop_assert_eq!(aggregate_episodes(&reread), aggregate_episodes(&runs));
    }
}
