mod common;

use blindcal::model::make_instance;
use blindcal::ndarray::Array1;
use blindcal::objective::gain_feasible;
use blindcal::solver::{
    initialize, least_squares_baseline, line_search_steps, max_relative_error, rmse_max, step_bound_eta,
};
use blindcal::{
    solve, Dims, Distribution, GroundTruth, Mode, Objective, ProblemInstance, ProjectionMethod, SolverOptions,
    StepPolicy, StopCriteria, StopReason, SubspaceSpec, UpdateOrder,
};
use common::*;
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn calibrated(n: usize, m: usize, p: usize, seed: u64) -> ProblemInstance<f64> {
    let mut r = rng(seed);
    let x = {
        let v = gaussian_vec(&mut r, n);
        &v / norm(&v)
    };
    let truth = GroundTruth::new(x, Array1::ones(m), 0.0).unwrap();
    ProblemInstance::from_truth(truth, p, Distribution::Gaussian, seed, None, None, true).unwrap()
}

/// Least squares through a dense SVD of the stacked operator.
fn svd_least_squares(inst: &ProblemInstance<f64>) -> Array1<f64> {
    let a = inst.sensing().stacked();
    let (rows, cols) = a.dim();
    let a = DMatrix::from_fn(rows, cols, |i, j| a[[i, j]]);
    let (m, p) = (inst.m(), inst.p());
    let y = DVector::from_fn(m * p, |r, _| inst.y()[[r % m, r / m]]);
    let sol = a.svd(true, true).solve(&y, 1e-12).unwrap();
    Array1::from_iter(sol.iter().copied())
}

#[test]
fn least_squares_matches_dense_solver() {
    let inst = make_instance::<f64>(Dims::new(12, 8, 4), Distribution::Gaussian, 0.3, 2, None, None).unwrap();
    let ours = least_squares_baseline(&inst, Mode::Ambient).unwrap();
    let want = svd_least_squares(&inst);
    assert!(rel_err(&ours, &want, 1e-12) < 1e-8);
}

#[test]
fn calibrated_gains_recover_the_signal() {
    let inst = calibrated(16, 8, 6, 3);
    let x = &inst.truth().x;
    let ls = least_squares_baseline(&inst, Mode::Ambient).unwrap();
    assert!(rel_err(&ls, x, 1e-12) < 1e-8);
    let rep = solve(&inst, &SolverOptions::new(Mode::Ambient)).unwrap();
    assert!(rep.converged());
    assert!(max_relative_error(&inst, &rep).unwrap() < 1e-3);
}

/// With flat true gains the blind estimate matches least squares.
#[test]
fn zero_rho_blind_matches_least_squares() {
    let inst = calibrated(10, 10, 5, 8);
    let stop = StopCriteria { objective_tol: Some(1e-24), iterate_tol: None, max_iters: 5000 };
    let rep = solve(&inst, &SolverOptions::new(Mode::Ambient).with_stop(stop)).unwrap();
    let ls = least_squares_baseline(&inst, Mode::Ambient).unwrap();
    assert!(rel_err(&rep.signal_estimate, &ls, 1e-12) < 1e-6);
}

/// `E ξ₀ = (‖g‖₁/m) x = x`, checked by averaging over many snapshots.
#[test]
fn initializer_is_unbiased() {
    let inst = make_instance::<f64>(Dims::new(5, 6, 6000), Distribution::Rademacher, 0.5, 1, None, None).unwrap();
    let obj = Objective::new(&inst, Mode::Ambient).unwrap();
    let it = initialize(&obj);
    let x = &inst.truth().x;
    // per-coordinate standard error is about ‖g‖/(m√p) ≈ 0.005
    assert!(sup_diff(&it.signal, x) < 0.03, "{} vs {}", it.signal, x);
    assert!(it.gain.iter().all(|&g| g == 1.0));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn iterates_stay_feasible_and_runs_repeat(seed in 0u64..10_000, rho in 0.0f64..0.9, pocs in any::<bool>()) {
        let inst = make_instance::<f64>(Dims::new(8, 8, 4), Distribution::Gaussian, rho, seed, None, None).unwrap();
        let method = if pocs { ProjectionMethod::Pocs } else { ProjectionMethod::Dykstra };
        let opts = SolverOptions { projection: method, ..SolverOptions::new(Mode::Ambient) }
            .with_stop(StopCriteria::noiseless().with_max_iters(400));
        let a = solve(&inst, &opts).unwrap();
        let b = solve(&inst, &opts).unwrap();
        prop_assert!(gain_feasible(a.gain_estimate.view(), rho));
        prop_assert_eq!(&a.signal_estimate, &b.signal_estimate);
        prop_assert_eq!(a.iterations, b.iterations);
        prop_assert_eq!(a.trajectory.len(), a.iterations + 1);
        // the line search never increases the objective
        for w in a.trajectory.windows(2) {
            prop_assert!(w[1].f <= w[0].f * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn line_search_steps_are_nonnegative(seed in 0u64..1000) {
        let inst = make_instance::<f64>(Dims::new(6, 5, 3), Distribution::Gaussian, 0.5, seed, None, None).unwrap();
        let obj = Objective::new(&inst, Mode::Ambient).unwrap();
        let it = random_iterate(&inst, Mode::Ambient, seed);
        let (ms, mg) = line_search_steps(&obj, &it).unwrap();
        prop_assert!(ms >= 0.0 && mg >= 0.0);
    }
}

#[test]
fn update_orders_and_fixed_steps_converge_on_easy_instances() {
    let inst = make_instance::<f64>(Dims::new(16, 16, 8), Distribution::Gaussian, 0.2, 4, None, None).unwrap();
    for order in [UpdateOrder::Jacobi, UpdateOrder::GaussSeidel] {
        let rep = solve(&inst, &SolverOptions::new(Mode::Ambient).with_order(order)).unwrap();
        assert_eq!(rep.stop_reason, StopReason::ObjectiveTol, "{order:?}");
        assert!(max_relative_error(&inst, &rep).unwrap() < 1e-3);
    }
    let policy = StepPolicy::fixed_with_default_ratio(0.5, &inst, Mode::Ambient).unwrap();
    let rep = solve(&inst, &SolverOptions::new(Mode::Ambient).with_policy(policy)).unwrap();
    assert_eq!(rep.stop_reason, StopReason::ObjectiveTol);
}

#[test]
fn subspace_solver_recovers_with_few_snapshots() {
    let dims = Dims::with_subspace(64, 32, 1, 8, 4);
    let inst = make_instance::<f64>(dims, Distribution::Gaussian, 0.3, 6, Some(SubspaceSpec::default()), None).unwrap();
    let rep = solve(&inst, &SolverOptions::for_instance(&inst)).unwrap();
    assert!(rep.converged());
    assert!(max_relative_error(&inst, &rep).unwrap() < 1e-3);
}

#[test]
fn noisy_runs_stop_on_iterate_change() {
    let inst = make_instance::<f64>(Dims::new(16, 16, 8), Distribution::Gaussian, 0.1, 2, None, Some(40.0)).unwrap();
    let rep = solve(&inst, &SolverOptions::for_instance(&inst)).unwrap();
    assert_eq!(rep.stop_reason, StopReason::IterateTol);
    let t = inst.truth();
    let db = rmse_max(&rep.signal_estimate, &rep.gain_estimate, &t.x, &t.g).unwrap();
    assert!(db < -20.0 && db > -80.0, "{db}");
}

#[test]
fn single_precision_solver() {
    let inst = make_instance::<f32>(Dims::new(16, 16, 8), Distribution::Gaussian, 0.2, 4, None, None).unwrap();
    let stop = StopCriteria { objective_tol: Some(1e-9), iterate_tol: Some(1e-6), max_iters: 2000 };
    let rep = solve(&inst, &SolverOptions::new(Mode::Ambient).with_stop(stop)).unwrap();
    assert!(max_relative_error(&inst, &rep).unwrap() < 1e-3);
}

#[test]
fn step_bound_helper() {
    assert!((step_bound_eta(0.01, 0.05) - (1.0 - 0.31 - 0.2)).abs() < 1e-15);
}
