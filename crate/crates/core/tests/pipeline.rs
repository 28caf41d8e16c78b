// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

use qloop::bench::{
    bell_benchmark_with, run_batch_traces, run_single, sweep_traces, Algorithm, BatchSummary, Overrides, SweepParameter,
};
use qloop::optim::{NmBranch, StopReason};

fn small(algorithm: Algorithm, overrides: Overrides) -> qloop::bench::Experiment {
    bell_benchmark_with(algorithm, &overrides).unwrap()
}

#[test]
fn runs_are_reproducible() {
    for alg in Algorithm::ALL {
        let exp = small(
            alg,
            Overrides {
                noise_sigma: Some(0.001),
                t_r_over_dt: Some(0.5),
                max_evals: Some(2_000),
                ..Default::default()
            },
        );
        let a = run_single(&exp, 3).unwrap();
        let b = run_single(&exp, 3).unwrap();
        assert_eq!(a, b, "{alg}");
        let c = run_single(&exp, 4).unwrap();
        assert_ne!(a.samples, c.samples, "{alg}: distinct runs share a stream");
    }
}

#[test]
fn grape_charges_243_per_iteration() {
    let exp = small(
        Algorithm::Grape,
        Overrides {
            runs: Some(4),
            ..Default::default()
        },
    );
    for trace in run_batch_traces(&exp).unwrap() {
        assert!(!trace.iterations.is_empty());
        for it in &trace.iterations {
            assert_eq!(it.evals, 243, "iteration {}", it.iteration);
        }
    }
}

#[test]
fn de_charges_60_per_generation() {
    let exp = small(
        Algorithm::De,
        Overrides {
            runs: Some(3),
            ..Default::default()
        },
    );
    for trace in run_batch_traces(&exp).unwrap() {
        assert_eq!(trace.setup_evals, 30);
        assert!(!trace.iterations.is_empty());
        for it in &trace.iterations {
            assert_eq!(it.evals, 60, "generation {}", it.iteration);
        }
    }
}

#[test]
fn nmplus_charges_three_per_measurement() {
    let exp = small(
        Algorithm::Nmplus,
        Overrides {
            runs: Some(4),
            ..Default::default()
        },
    );
    let p = exp.system.layout().len();
    let mut seen = Vec::new();
    for trace in run_batch_traces(&exp).unwrap() {
        assert_eq!(trace.setup_evals, 3 * (p as u64 + 1));
        for it in &trace.iterations {
            let branch = it.branch.expect("NMplus logs its branch");
            assert_eq!(it.evals, 3 * branch.measurements(p));
            seen.push(branch);
        }
    }
    assert!(seen.contains(&NmBranch::Reflect));
}

#[test]
fn totals_add_up() {
    for alg in Algorithm::ALL {
        let exp = small(
            alg,
            Overrides {
                runs: Some(2),
                noise_sigma: Some(0.002),
                ..Default::default()
            },
        );
        for trace in run_batch_traces(&exp).unwrap() {
            let spent: u64 = trace.setup_evals + trace.iterations.iter().map(|i| i.evals).sum::<u64>();
            assert!(spent <= trace.total_evals, "{alg}");
            let last = trace.samples.last().unwrap();
            assert_eq!(last.cumulative_evals, trace.total_evals, "{alg}");
            assert!(trace
                .samples
                .windows(2)
                .all(|w| w[0].cumulative_evals <= w[1].cumulative_evals));
        }
    }
}

#[test]
fn budget_is_respected() {
    for alg in Algorithm::ALL {
        let exp = small(
            alg,
            Overrides {
                max_evals: Some(10),
                ..Default::default()
            },
        );
        let trace = run_single(&exp, 0).unwrap();
        assert_eq!(trace.stop_reason, StopReason::EvalBudgetExhausted, "{alg}");
        assert!(trace.total_evals > 10, "{alg}");
        assert!(trace.terminal_pulse.within_bounds(-50.0, 50.0));
    }
}

#[test]
fn single_point_sweep_is_a_batch() {
    let exp = small(
        Algorithm::Nmplus,
        Overrides {
            runs: Some(3),
            ..Default::default()
        },
    );
    let swept = sweep_traces(&exp, SweepParameter::TrOverDt, &[0.0]).unwrap();
    assert_eq!(swept.len(), 1);
    assert_eq!(swept[0].1, run_batch_traces(&exp).unwrap());
}

#[test]
fn sweep_points_use_separate_streams() {
    let exp = small(
        Algorithm::De,
        Overrides {
            runs: Some(2),
            max_evals: Some(500),
            ..Default::default()
        },
    );
    let swept = sweep_traces(&exp, SweepParameter::NoiseSigma, &[0.0, 0.0]).unwrap();
    assert_ne!(swept[0].1[0].samples, swept[1].1[0].samples);
}

#[test]
fn summary_of_reached_runs() {
    let exp = small(
        Algorithm::Grape,
        Overrides {
            runs: Some(5),
            ..Default::default()
        },
    );
    let traces = run_batch_traces(&exp).unwrap();
    let s = BatchSummary::from_traces(&traces, exp.stopping.threshold_infidelity);
    assert_eq!(s.runs, 5);
    let reached = traces.iter().filter(|t| t.succeeded()).count();
    assert_eq!(s.success_rate, reached as f64 / 5.0);
    assert_eq!(s.mean_evals.is_some(), reached > 0);
    assert!(s.curve.infidelity.iter().all(|v| (0.0..=1.0).contains(v)));
}
