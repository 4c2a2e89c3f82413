//! Monte Carlo behavior of the tuning and selection machinery: forecast
//! validation prefers the zero model on pure noise, chooses finite
//! truncation under heavy tails, and barely distinguishes truncation under
//! Gaussian data; the population regression identifies the true
//! coefficients at large samples.

mod common;

use bekk::design::{build_design, ReturnPanel};
use bekk::fista::FistaConfig;
use bekk::select::{select_p, tune_lambda_tau, SelectConfig};
use bekk::simulate::{
    gen_bekk_params, simulate_series, theta_from_bekk, DgpSpec, Innovation,
};
use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn zero_model_beats_overfit_on_pure_noise() {
    // no signal and nearly as many regressors as training rows: the fully
    // shrunk model forecasts better on average than the unpenalized one
    // (the penalty covers the intercept too, so the shrunk model pays the
    // mean of the squared-return process; the overfit variance still
    // dominates in this regime)
    let mut better = 0;
    let reps = 20;
    let mut total_gap = 0.0;
    for seed in 0..reps {
        let mut r = rng(300 + seed);
        let panel = ReturnPanel::new(random_matrix(40, 3, &mut r)).unwrap();
        let cfg = SelectConfig {
            lambda_grid: vec![0.0, 1e9],
            tau_grid: vec![f64::INFINITY],
            valid_len: Some(10),
            ..Default::default()
        };
        // p = 3 gives 19 regressors against ~27 training rows
        let out = tune_lambda_tau(&panel, 3, &cfg, &FistaConfig::default()).unwrap();
        let msfe_zero = out.table.iter().find(|(l, _, _)| *l == 1e9).unwrap().2;
        let msfe_ols = out.table.iter().find(|(l, _, _)| *l == 0.0).unwrap().2;
        if msfe_zero <= msfe_ols {
            better += 1;
        }
        total_gap += msfe_ols - msfe_zero;
    }
    assert!(total_gap > 0.0, "zero model should win on average, gap {total_gap}");
    assert!(better > reps / 2, "zero model won only {better}/{reps}");
}

fn tuned_tau_one_rep(seed: u64, innovation: Innovation) -> (f64, Vec<(f64, f64, f64)>) {
    let spec = DgpSpec {
        n: 5,
        p: 1,
        s: 2,
        k: vec![1],
        innovation,
        seed,
        arch_diag: [0.3, 0.5],
        arch_offdiag: [-0.1, 0.1],
        ..Default::default()
    };
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    let params = gen_bekk_params(&spec, &mut r).unwrap();
    let sim = simulate_series(&params, 400, 200, innovation, &mut r).unwrap();
    let cfg = SelectConfig { valid_len: Some(15), ..Default::default() };
    let out = tune_lambda_tau(&sim.panel, 1, &cfg, &FistaConfig::default()).unwrap();
    (out.tau, out.table)
}

#[test]
fn heavy_tails_prefer_finite_truncation() {
    let reps = 30;
    let mut finite = 0;
    for seed in 0..reps {
        let (tau, _) = tuned_tau_one_rep(1000 + seed, Innovation::StudentT(4.2));
        if tau.is_finite() {
            finite += 1;
        }
    }
    let rate = finite as f64 / reps as f64;
    assert!(rate >= 0.6, "finite truncation selected in only {rate:.2} of runs");
}

#[test]
fn gaussian_data_barely_distinguish_truncation() {
    // light tails: forecast error of the untruncated model within a few
    // percent of the best finite-truncation one, on average
    let reps = 30;
    let mut rel_gaps = 0.0;
    for seed in 0..reps {
        let (_, table) = tuned_tau_one_rep(2000 + seed, Innovation::Gaussian);
        let best_inf = table
            .iter()
            .filter(|(_, t, _)| t.is_infinite())
            .map(|(_, _, m)| *m)
            .fold(f64::INFINITY, f64::min);
        let best_finite = table
            .iter()
            .filter(|(_, t, _)| t.is_finite())
            .map(|(_, _, m)| *m)
            .fold(f64::INFINITY, f64::min);
        rel_gaps += (best_inf - best_finite).abs() / best_finite;
    }
    let mean_gap = rel_gaps / reps as f64;
    assert!(mean_gap < 0.05, "mean relative gap {mean_gap:.4} exceeds 5%");
}

#[test]
fn population_regression_recovers_coefficient_direction() {
    // large-sample unpenalized regression of the vech outer products on
    // their lags correlates strongly with the true stacked coefficients
    let spec = DgpSpec {
        n: 3,
        p: 1,
        s: 2,
        k: vec![1],
        seed: 7,
        arch_diag: [0.35, 0.55],
        arch_offdiag: [-0.15, 0.15],
        ..Default::default()
    };
    let mut r = ChaCha8Rng::seed_from_u64(7);
    let params = gen_bekk_params(&spec, &mut r).unwrap();
    let truth = theta_from_bekk(&params).unwrap();
    let sim = simulate_series(&params, 100_000, 500, Innovation::Gaussian, &mut r).unwrap();
    let design = build_design(&sim.panel, 1, f64::INFINITY).unwrap();
    let xtx = design.x.transpose() * &design.x;
    let xty = design.x.transpose() * &design.y;
    let ols = xtx.lu().solve(&xty).unwrap();

    let a: Vec<f64> = ols.iter().cloned().collect();
    let b: Vec<f64> = truth.as_matrix().iter().cloned().collect();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&a), mean(&b));
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for (x, y) in a.iter().zip(b.iter()) {
        num += (x - ma) * (y - mb);
        da += (x - ma) * (x - ma);
        db += (y - mb) * (y - mb);
    }
    let corr = num / (da.sqrt() * db.sqrt());
    assert!(corr > 0.95, "correlation {corr:.4} too weak");
}

#[test]
fn select_p_order_one_majority() {
    let reps = 15u64;
    let mut hits = 0;
    for seed in 0..reps {
        let spec = DgpSpec {
            n: 5,
            p: 1,
            s: 2,
            k: vec![1],
            innovation: Innovation::Gaussian,
            seed,
            arch_diag: [0.4, 0.6],
            arch_offdiag: [-0.12, 0.12],
            ..Default::default()
        };
        let mut r = ChaCha8Rng::seed_from_u64(seed);
        let params = gen_bekk_params(&spec, &mut r).unwrap();
        let sim = simulate_series(&params, 1500, 300, Innovation::Gaussian, &mut r).unwrap();
        let cfg = SelectConfig { p_max: 3, iota_d: 0.2, valid_len: Some(25), ..Default::default() };
        let out = select_p(&sim.panel, &cfg, &FistaConfig::default(), None).unwrap();
        if out.p == 1 {
            hits += 1;
        }
    }
    assert!(hits * 5 >= reps * 4, "selected order one in only {hits}/{reps} runs");
}
