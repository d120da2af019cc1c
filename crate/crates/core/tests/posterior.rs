use explore_core::bayes::{episode_sweep, PosteriorState, SweepSettings, VarianceForm};
use explore_core::features::{RffMap, SamplingScheme};
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_features(n: usize, m: usize, seed: u64) -> Array2<f64> {
    let map = RffMap::with_features(&[0.5, 0.5, 0.5], m, SamplingScheme::MonteCarlo, seed).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed + 1);
    let mut phi = Array2::zeros((n, m));
    for mut row in phi.rows_mut() {
        let x: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        row.assign(&map.embed(&x).unwrap());
    }
    phi
}

fn to_nalgebra(a: &Array2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

/// `(αI + βΦᵀΦ)⁻¹` by Cholesky.
fn direct_covariance(phi: &Array2<f64>, alpha: f64, beta: f64) -> DMatrix<f64> {
    let p = to_nalgebra(phi);
    let m = p.ncols();
    let a = DMatrix::identity(m, m) * alpha + p.transpose() * &p * beta;
    a.cholesky().expect("SPD").inverse()
}

#[test]
fn incremental_covariance_matches_direct_inverse() {
    let (n, m, alpha, beta) = (500, 50, 0.1, 1.0);
    let phi = random_features(n, m, 3);
    let mut post = PosteriorState::new(alpha, beta, m).unwrap();
    for row in phi.rows() {
        post.rank1_update(row).unwrap();
    }
    let direct = direct_covariance(&phi, alpha, beta);
    let s = post.covariance();
    let worst = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .map(|(i, j)| (s[[i, j]] - direct[(i, j)]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-8, "max |S - direct| = {worst:e}");
}

#[test]
fn zero_discount_mean_is_ridge_solution() {
    let (n, m, alpha, beta) = (500, 50, 0.1, 1.0);
    let phi = random_features(n, m, 8);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let rewards: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut post = PosteriorState::new(alpha, beta, m).unwrap();
    for (row, &r) in phi.rows().into_iter().zip(&rewards) {
        post.absorb_step(row, r, 0.0, Some(row), 0.0).unwrap();
    }
    let ridge = direct_covariance(&phi, alpha, beta) * to_nalgebra(&phi).transpose() * DVector::from_vec(rewards) * beta;
    let worst = (0..m)
        .map(|i| (post.mean_q()[i] - ridge[i]).abs())
        .fold(0.0, f64::max);
    assert!(worst < 1e-6, "max |m_Q - ridge| = {worst:e}");
    assert!(post.mean_u().iter().all(|&u| u == 0.0));
}

#[test]
fn sweep_with_zero_discount_keeps_ridge_solution() {
    let (n, m) = (200, 30);
    let phi = random_features(n, m, 5);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let rewards = Array1::from_iter((0..n).map(|_| rng.random_range(-1.0..1.0)));
    let mut post = PosteriorState::new(0.1, 1.0, m).unwrap();
    for (row, &r) in phi.rows().into_iter().zip(rewards.iter()) {
        post.absorb_step(row, r, 0.0, None, 0.0).unwrap();
    }
    let before = post.mean_q().clone();
    let settings = SweepSettings {
        gamma: 0.0,
        ..SweepSettings::default()
    };
    let report = episode_sweep(
        &mut post,
        phi.view(),
        rewards.view(),
        Array1::zeros(n).view(),
        phi.view(),
        Array1::ones(n).view(),
        settings,
    )
    .unwrap();
    assert!(report.converged());
    let worst = (&before - post.mean_q()).mapv(f64::abs).fold(0.0, |a: f64, &b| a.max(b));
    assert!(worst < 1e-10);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn variance_never_increases_with_data(seed in 0u64..10_000, n in 1usize..40) {
        let m = 20;
        let phi = random_features(n + 5, m, seed);
        let mut post = PosteriorState::new(0.1, 1.0, m).unwrap();
        let probes: Vec<_> = phi.rows().into_iter().skip(n).collect();
        let mut last: Vec<f64> = probes
            .iter()
            .map(|p| post.predict_var(*p, VarianceForm::Epistemic).unwrap())
            .collect();
        for row in phi.rows().into_iter().take(n) {
            post.rank1_update(row).unwrap();
            for (k, p) in probes.iter().enumerate() {
                let v = post.predict_var(*p, VarianceForm::Epistemic).unwrap();
                prop_assert!(v <= last[k] + 1e-12, "variance rose from {} to {}", last[k], v);
                prop_assert!(v >= -1e-12);
                prop_assert!(v <= post.vmax(VarianceForm::Epistemic) + 1e-12);
                last[k] = v;
            }
        }
    }
}
