// Worked examples for the solvers and the simulation harness, each checked
// against an independent reference (simplex LP, grid search or Monte Carlo).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use quantile_tf::lasso::{l1_qr_fit, DesignMatrix, L1QrProblem};
use quantile_tf::lattice::{qtvd_fit, LatticeSignal, QtvdMode, QtvdProblem};
use quantile_tf::oracle::{cqtf_oracle, l1qr_oracle, pqtf_oracle, qtvd_oracle};
use quantile_tf::qtf::{
    cqtf_fit, multi_quantile_fit, pqtf_fit, CqtfProblem, MultiQuantileProblem, PqtfProblem,
};
use quantile_tf::sim::{
    bic_select, run_experiment, ExperimentConfig, Method, ScenarioSpec, Tuning, TuningGrid,
};
use quantile_tf::{
    check_objective, tv_r, Algorithm, DiffOrder, QuantileLevel, Signal, SolverConfig,
};

const ORACLE_TOL: f64 = 1e-4;

fn backends() -> [SolverConfig; 2] {
    [
        SolverConfig::precise(),
        SolverConfig {
            algorithm: Algorithm::Admm,
            ..SolverConfig::precise()
        },
    ]
}

fn signal(v: &[f64]) -> Signal {
    Signal::new(v.to_vec()).unwrap()
}

fn pqtf_objective(p: &PqtfProblem, theta: &[f64]) -> f64 {
    check_objective(&p.y, theta, p.tau).unwrap() + p.lambda * tv_r(theta, p.r).unwrap()
}

/// Minimizer of the check loss over a fine grid of constants.
fn grid_constant(y: &[f64], tau: QuantileLevel) -> (f64, f64) {
    let lo = y.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = y.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut best = (lo, f64::INFINITY);
    for k in 0..=20_000 {
        let c = lo + (hi - lo) * k as f64 / 20_000.0;
        let loss = check_objective(y, &vec![c; y.len()], tau).unwrap();
        if loss < best.1 {
            best = (c, loss);
        }
    }
    best
}

#[test]
fn step_data_penalized_matches_lp() {
    let p = PqtfProblem::with_effective_lambda(
        signal(&[0.0, 0.0, 5.0, 5.0, 5.0]),
        QuantileLevel::MEDIAN,
        DiffOrder::new(1).unwrap(),
        1.0,
    )
    .unwrap();
    let (opt, _) = pqtf_oracle(&p).unwrap();
    for cfg in backends() {
        let fit = pqtf_fit(&p, &cfg).unwrap();
        let obj = pqtf_objective(&p, fit.theta());
        assert!(
            (obj - opt).abs() <= ORACLE_TOL,
            "{:?}: {obj} vs {opt}",
            cfg.algorithm
        );
    }
}

#[test]
fn huge_second_order_penalty_gives_best_affine_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 50;
    let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let r = DiffOrder::new(2).unwrap();
    let p = PqtfProblem::with_effective_lambda(signal(&y), QuantileLevel::MEDIAN, r, 1e8).unwrap();
    let fit = pqtf_fit(&p, &SolverConfig::precise()).unwrap();
    assert!(tv_r(fit.theta(), r).unwrap() <= 1e-4);

    // the best affine median fit is a two-column quantile regression
    let design: Vec<f64> = (1..=n).flat_map(|i| [1.0, i as f64 / n as f64]).collect();
    let x = DesignMatrix::new(n, 2, design).unwrap();
    let lp = L1QrProblem::new(x, signal(&y), QuantileLevel::MEDIAN, 1e3).unwrap();
    let (affine_loss, _) = l1qr_oracle(&lp).unwrap();
    let loss = check_objective(&y, fit.theta(), QuantileLevel::MEDIAN).unwrap();
    assert!(
        (loss - affine_loss).abs() <= ORACLE_TOL * (1.0 + affine_loss),
        "{loss} vs {affine_loss}"
    );
}

#[test]
fn half_budget_constrained_matches_lp() {
    let p = CqtfProblem::new(
        signal(&[0.0, 0.0, 1.0, 1.0]),
        QuantileLevel::MEDIAN,
        DiffOrder::new(1).unwrap(),
        0.5,
    )
    .unwrap();
    let (opt, _) = cqtf_oracle(&p).unwrap();
    for cfg in backends() {
        let fit = cqtf_fit(&p, &cfg).unwrap();
        assert!(fit.tv <= 0.5 + 1e-12);
        let obj = check_objective(&p.y, fit.theta(), p.tau).unwrap();
        assert!(
            (obj - opt).abs() <= ORACLE_TOL,
            "{:?}: {obj} vs {opt}",
            cfg.algorithm
        );
    }
}

#[test]
fn zero_budget_levels_are_ordered_constants() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let y: Vec<f64> = (0..31).map(|_| rng.random::<f64>() * 10.0).collect();
    let levels = vec![
        QuantileLevel::new(0.25).unwrap(),
        QuantileLevel::new(0.75).unwrap(),
    ];
    let p = MultiQuantileProblem::new(
        signal(&y),
        levels.clone(),
        DiffOrder::new(1).unwrap(),
        vec![0.0, 0.0],
    )
    .unwrap();
    let fits = multi_quantile_fit(&p, &SolverConfig::precise()).unwrap();
    for (fit, tau) in fits.iter().zip(&levels) {
        let theta = fit.theta();
        assert!(theta.iter().all(|v| (v - theta[0]).abs() < 1e-9));
        let (_, best) = grid_constant(&y, *tau);
        let loss = check_objective(&y, theta, *tau).unwrap();
        assert!(
            loss <= best + 1e-6,
            "level {}: {loss} vs grid {best}",
            tau.value()
        );
    }
    assert!(fits[0].theta()[0] <= fits[1].theta()[0]);
}

#[test]
fn scenario_six_joint_fit_does_not_cross() {
    let spec = ScenarioSpec::new(6, 200, 9).unwrap();
    let y = spec.generate().unwrap();
    let r = DiffOrder::new(1).unwrap();
    let levels = vec![
        QuantileLevel::new(0.1).unwrap(),
        QuantileLevel::new(0.9).unwrap(),
    ];
    let budgets = levels
        .iter()
        .map(|t| tv_r(&spec.true_quantile(*t).unwrap(), r).unwrap())
        .collect();
    let p = MultiQuantileProblem::new(y, levels, r, budgets).unwrap();
    let fits = multi_quantile_fit(&p, &SolverConfig::default()).unwrap();
    for (lo, hi) in fits[0].theta().iter().zip(fits[1].theta()) {
        assert!(lo <= hi, "{lo} > {hi}");
    }
}

#[test]
fn three_by_three_lattice_matches_lp() {
    let y = LatticeSignal::from_rows(vec![
        vec![3.0, 1.0, 4.0],
        vec![1.0, 5.0, 9.0],
        vec![2.0, 6.0, 5.0],
    ])
    .unwrap();
    let p = QtvdProblem::new(
        y,
        QuantileLevel::MEDIAN,
        QtvdMode::Penalized { lambda: 0.7 },
    )
    .unwrap();
    let (opt, _) = qtvd_oracle(&p).unwrap();
    for cfg in backends() {
        let fit = qtvd_fit(&p, &cfg).unwrap();
        let obj =
            check_objective(p.y.values(), &fit.solve.theta_hat, p.tau).unwrap() + 0.7 * fit.tv;
        assert!(
            (obj - opt).abs() <= ORACLE_TOL,
            "{:?}: {obj} vs {opt}",
            cfg.algorithm
        );
    }
}

#[test]
fn intercept_only_regression_is_the_median() {
    let y = [3.0, -1.0, 8.0, 2.5, 0.5, 7.0, 4.0];
    let x = DesignMatrix::new(7, 1, vec![1.0; 7]).unwrap();
    let p = L1QrProblem::new(x, signal(&y), QuantileLevel::MEDIAN, 5.0).unwrap();
    let (median, _) = grid_constant(&y, QuantileLevel::MEDIAN);
    for cfg in backends() {
        let fit = l1_qr_fit(&p, &cfg).unwrap();
        assert!(
            (fit.beta_hat[0] - median).abs() < 1e-3,
            "{:?}: {:?}",
            cfg.algorithm,
            fit.beta_hat
        );
    }
}

#[test]
fn small_regression_with_budget_matches_lp() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let x = DesignMatrix::new(
        8,
        3,
        (0..24).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect(),
    )
    .unwrap();
    let y: Vec<f64> = (0..8).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let p = L1QrProblem::new(x, signal(&y), QuantileLevel::new(0.7).unwrap(), 1.0).unwrap();
    let (opt, _) = l1qr_oracle(&p).unwrap();
    for cfg in backends() {
        let fit = l1_qr_fit(&p, &cfg).unwrap();
        assert!(fit.beta_hat.iter().map(|b| b.abs()).sum::<f64>() <= 1.0 + 1e-12);
        assert!(
            (fit.solve.objective - opt).abs() <= ORACLE_TOL,
            "{:?}",
            cfg.algorithm
        );
    }
}

#[test]
fn lp_optimum_lower_bounds_admm() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let cfg = SolverConfig {
        algorithm: Algorithm::Admm,
        ..SolverConfig::default()
    };
    for _ in 0..20 {
        let n = rng.random_range(3..=12);
        let y: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 6.0 - 3.0).collect();
        let tau = QuantileLevel::new(rng.random_range(0.05..0.95)).unwrap();
        let lambda = 10f64.powf(rng.random_range(-2.0..1.0));
        let p = PqtfProblem::new(signal(&y), tau, DiffOrder::new(1).unwrap(), lambda).unwrap();
        let (opt, _) = pqtf_oracle(&p).unwrap();
        let fit = pqtf_fit(&p, &cfg).unwrap();
        assert!(opt <= pqtf_objective(&p, fit.theta()) + 1e-9);
    }
}

#[test]
fn cauchy_scenario_residual_mad() {
    let spec = ScenarioSpec::new(2, 10_000, 2).unwrap();
    let y = spec.generate().unwrap();
    let truth = spec.true_quantile(QuantileLevel::MEDIAN).unwrap();
    let mut dev: Vec<f64> = y
        .iter()
        .zip(truth.iter())
        .map(|(a, b)| (a - b).abs())
        .collect();
    dev.sort_by(f64::total_cmp);
    let mad = 0.5 * (dev[4_999] + dev[5_000]);
    assert!((0.8..=1.25).contains(&mad), "{mad}");
}

#[test]
fn bic_prefers_heavy_smoothing_for_a_noisy_line() {
    // noise small enough that every fit sits on the loss floor, so BIC ties
    // and the largest lambda wins
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let n = 100;
    let y: Vec<f64> = (1..=n)
        .map(|i| 1.0 + 2.0 * i as f64 / n as f64 + 1e-13 * (rng.random::<f64>() - 0.5))
        .collect();
    let grid = TuningGrid::new(1.0, 4.5, 50).unwrap();
    let sel = bic_select(
        &y,
        QuantileLevel::MEDIAN,
        DiffOrder::new(2).unwrap(),
        &grid,
        &SolverConfig::default(),
    )
    .unwrap();
    assert!(sel.index >= 45, "selected index {}", sel.index);
}

#[test]
fn bic_risk_is_close_to_the_oracle_risk() {
    let base = ExperimentConfig {
        scenario: 1,
        n: 1000,
        method: Method::Pqtf1,
        grid: Some(TuningGrid::new(1.0, 4.5, 40).unwrap()),
        replicates: 8,
        seed: 12,
        ..ExperimentConfig::default()
    };
    let oracle = run_experiment(&base).unwrap().summary.mse.mean;
    let bic = run_experiment(&ExperimentConfig {
        tuning: Tuning::Bic,
        ..base
    })
    .unwrap()
    .summary
    .mse
    .mean;
    assert!(bic <= 3.0 * oracle, "bic {bic} vs oracle {oracle}");
}

#[test]
fn experiments_are_reproducible() {
    let cfg = ExperimentConfig {
        scenario: 4,
        n: 200,
        method: Method::Pqtf2,
        grid: Some(TuningGrid::new(1.0, 4.5, 8).unwrap()),
        replicates: 3,
        seed: 5,
        ..ExperimentConfig::default()
    };
    let a = run_experiment(&cfg).unwrap();
    let b = run_experiment(&cfg).unwrap();
    assert_eq!(
        serde_json::to_string(&a.summary).unwrap(),
        serde_json::to_string(&b.summary).unwrap()
    );
}
