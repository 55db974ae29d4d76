// Copyright 2026 The insitu Authors
// SPDX-License-Identifier: Apache-2.0

use std::sync::Arc;

use insitu::estimators::{uniform_controls, BinomialEstimator, ExactEstimator, Shots};
use insitu::harness::{
    aggregate, run_trials, EstimatorSpec, ExperimentConfig, OptimizerSpec, ProblemSpec, QubitSpec,
};
use insitu::optimizers::{
    nelder_mead, run_spsa, ExSituConfig, GainSchedule, IterationGrid, NelderMeadConfig,
    StoppingRule,
};
use insitu::problems::{ControlProblem, ControlVector, SingleQubitProblem};
use insitu::quantum::Unitary;
use insitu::rng::from_seed;

fn realizable_problem(seed: u64) -> SingleQubitProblem {
    let scratch = SingleQubitProblem::with_target(Unitary::identity(2)).unwrap();
    let reachable = scratch
        .unitary(&uniform_controls(10, &mut from_seed(seed)))
        .unwrap();
    SingleQubitProblem::with_target(reachable).unwrap()
}

#[test]
fn exact_spsa_improves_a_realizable_target() {
    let problem = Arc::new(realizable_problem(1));
    let truth = {
        let problem = problem.clone();
        move |c: &ControlVector| problem.true_fidelity(c)
    };
    let mut estimator = ExactEstimator::new(problem);
    let trace = run_spsa(
        &truth,
        &mut estimator,
        &GainSchedule::set_b(),
        ControlVector::zeros(10),
        &StoppingRule::budget(10_000),
        IterationGrid::default(),
        from_seed(2),
    )
    .unwrap();
    assert!(trace.final_infidelity() < trace.records[0].infidelity());
    assert_eq!(trace.calls, 20_000);
}

#[test]
fn binomial_spsa_median_drops_tenfold_over_two_decades() {
    let config = ExperimentConfig {
        iterations: 10_000,
        trials: 20,
        seed: 11,
        ..Default::default()
    };
    let series = aggregate(&run_trials(&config).unwrap()).unwrap();
    let early = series.at(100).unwrap().median;
    let late = series.at(10_000).unwrap().median;
    assert!(early / late >= 10.0, "{early} -> {late}");
}

#[test]
fn nelder_mead_call_rate_on_the_qubit_problem() {
    let config = ExperimentConfig {
        optimizer: OptimizerSpec::NelderMead(NelderMeadConfig::default()),
        estimator: EstimatorSpec {
            shots: Shots::Finite(1000),
            sigma: 0.0,
        },
        iterations: 1000,
        trials: 10,
        seed: 12,
        ..Default::default()
    };
    for trace in run_trials(&config).unwrap() {
        let m = trace.mean_calls_per_iteration().unwrap();
        assert!((2.0..=6.0).contains(&m), "M = {m}");
        for r in &trace.records {
            assert!(r.calls > r.iteration);
        }
    }
}

#[test]
fn experiment_counts_strictly_increase() {
    let problem: Arc<dyn ControlProblem> = Arc::new(realizable_problem(3));
    let truth = {
        let problem = problem.clone();
        move |c: &ControlVector| problem.true_fidelity(c)
    };
    let mut estimator = BinomialEstimator::new(problem.clone(), 500, from_seed(4)).unwrap();
    let spsa = run_spsa(
        &truth,
        &mut estimator,
        &GainSchedule::set_a(),
        ControlVector::zeros(10),
        &StoppingRule::budget(2000),
        IterationGrid::default(),
        from_seed(5),
    )
    .unwrap();
    let mut estimator = BinomialEstimator::new(problem, 500, from_seed(6)).unwrap();
    let simplex = nelder_mead(
        &truth,
        &mut estimator,
        uniform_controls(10, &mut from_seed(7)),
        &NelderMeadConfig::default(),
        &StoppingRule::budget(2000),
        IterationGrid::default(),
    )
    .unwrap();
    for trace in [spsa, simplex] {
        for w in trace.records.windows(2) {
            assert!(w[0].iteration < w[1].iteration);
            assert!(w[0].experiments.unwrap() < w[1].experiments.unwrap());
            assert_eq!(w[1].experiments.unwrap(), 500 * w[1].calls);
        }
    }
}

#[test]
fn ex_situ_floor_shrinks_with_model_error() {
    let floor = |model_error: f64| {
        let config = ExperimentConfig {
            problem: ProblemSpec::Qubit(QubitSpec {
                model_error,
                ..Default::default()
            }),
            optimizer: OptimizerSpec::ExSitu(ExSituConfig::default()),
            estimator: EstimatorSpec {
                shots: Shots::Exact,
                sigma: 0.0,
            },
            iterations: 1000,
            trials: 10,
            seed: 13,
            ..Default::default()
        };
        aggregate(&run_trials(&config).unwrap())
            .unwrap()
            .last()
            .median
    };
    let coarse = floor(1e-2);
    let fine = floor(1e-3);
    assert!(fine > 0.0 && fine < coarse, "{fine} vs {coarse}");
}
