// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! nonzero when a criterion outside [`REPORT_ONLY`] fails.
//!
//! `cargo test --release --test acceptance`

use std::io::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use qloop::bench::{
    bell_benchmark, bell_benchmark_with, efficiency_factor, run_batch_traces, run_single, sweep, Algorithm,
    BatchSummary, Overrides, SweepParameter,
};
use qloop::cli::output::trace_csv;
use qloop::distort::{distort_pulse, filter_response, DistortionConfig};
use qloop::measure::TomographyScheme;
use qloop::optim::{grape_measure_gradient, FidelityOracle, RunTrace, SpinOracle};
use qloop::qsim::{
    bell_target, evolve, matrix_exp_hermitian, pulse_hamiltonians, CMatrix, ControlPulse, DensityMatrix,
};

/// Criteria whose outcome is printed but does not decide the exit status.
const REPORT_ONLY: [usize; 2] = [4, 6];

const FIDELITY_99: f64 = 0.99;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn random_pulse(exp: &qloop::bench::Experiment, rng: &mut ChaCha8Rng) -> ControlPulse {
    let layout = exp.system.layout();
    let (lo, hi) = exp.bounds;
    ControlPulse::new(layout, (0..layout.len()).map(|_| rng.gen_range(lo..=hi)).collect()).unwrap()
}

fn random_complex(rng: &mut ChaCha8Rng) -> Complex64 {
    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
}

fn random_hermitian(dim: usize, rng: &mut ChaCha8Rng) -> CMatrix {
    let a = CMatrix::from_fn(dim, |_, _| random_complex(rng));
    (&a + &a.adjoint()).scale_real(0.5)
}

fn random_state(dim: usize, rng: &mut ChaCha8Rng) -> DensityMatrix {
    // Rank drawn from 1..=dim so pure and mixed states both appear.
    let rank = rng.gen_range(1..=dim);
    let a = CMatrix::from_fn(dim, |_, j| {
        if j < rank {
            random_complex(rng)
        } else {
            Complex64::new(0.0, 0.0)
        }
    });
    let m = a.mul_adjoint(&a);
    let tr = m.trace().re;
    DensityMatrix::new(m.scale_real(1.0 / tr)).unwrap()
}

fn noiseless_batches() -> Vec<(Algorithm, Vec<RunTrace>, BatchSummary)> {
    Algorithm::ALL
        .into_iter()
        .map(|alg| {
            let exp = bell_benchmark(alg);
            let traces = run_batch_traces(&exp).unwrap();
            let summary = BatchSummary::from_traces(&traces, exp.stopping.threshold_infidelity);
            (alg, traces, summary)
        })
        .collect()
}

fn criterion_1(batches: &[(Algorithm, Vec<RunTrace>, BatchSummary)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (alg, _, s) in batches {
        pass &= s.mean_final_exact_fidelity >= FIDELITY_99;
        parts.push(format!("{alg} mean F={:.5}", s.mean_final_exact_fidelity));
    }
    outcome(pass, parts.join(", "))
}

fn criterion_2(batches: &[(Algorithm, Vec<RunTrace>, BatchSummary)]) -> Outcome {
    let get = |a: Algorithm| &batches.iter().find(|b| b.0 == a).unwrap().2;
    let (grape, nm, de) = (get(Algorithm::Grape), get(Algorithm::Nmplus), get(Algorithm::De));
    let eval = |s: &BatchSummary| s.evals_to(FIDELITY_99);
    let g_factor = efficiency_factor(grape, nm, FIDELITY_99);
    let d_factor = efficiency_factor(de, nm, FIDELITY_99);
    let pass = match (eval(grape), eval(nm), eval(de), g_factor, d_factor) {
        (Some(g), Some(n), Some(d), Some(fg), Some(fd)) => n < g && n < d && fg > 1.5 && fd > 1.5,
        _ => false,
    };
    let show = |x: Option<f64>| x.map(|v| format!("{v:.1}")).unwrap_or_else(|| "none".into());
    outcome(
        pass,
        format!(
            "eval99 grape={} nmplus={} de={}; factors grape/nmplus={} de/nmplus={}",
            show(eval(grape)),
            show(eval(nm)),
            show(eval(de)),
            show(g_factor),
            show(d_factor)
        ),
    )
}

fn criterion_3(batches: &[(Algorithm, Vec<RunTrace>, BatchSummary)]) -> Outcome {
    let p = bell_benchmark(Algorithm::Nmplus).system.layout().len();
    let mut checked = 0usize;
    let mut bad = 0usize;
    for (alg, traces, _) in batches {
        for it in traces.iter().flat_map(|t| &t.iterations) {
            let expected = match alg {
                Algorithm::Grape => 243,
                Algorithm::De => 60,
                Algorithm::Nmplus => match it.branch {
                    Some(b) => 3 * b.measurements(p),
                    None => u64::MAX,
                },
            };
            checked += 1;
            bad += usize::from(it.evals != expected);
        }
    }
    outcome(
        bad == 0 && checked > 0,
        format!("{checked} iterations audited, {bad} mismatched"),
    )
}

fn criterion_4() -> Outcome {
    let exp = bell_benchmark(Algorithm::Grape);
    let mut oracle = exp.oracle(0, 0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let delta = 1e-3;
    let mut worst: f64 = 0.0;
    let mut largest: f64 = 0.0;
    for _ in 0..20 {
        let pulse = random_pulse(&exp, &mut rng);
        let grad = grape_measure_gradient(&mut oracle, &pulse).unwrap();
        for (k, g) in grad.iter().enumerate() {
            let mut plus = pulse.clone();
            plus.as_mut_slice()[k] += delta;
            let mut minus = pulse.clone();
            minus.as_mut_slice()[k] -= delta;
            let fd = (oracle.exact_fidelity(&plus).unwrap() - oracle.exact_fidelity(&minus).unwrap()) / (2.0 * delta);
            worst = worst.max((g - fd).abs());
            largest = largest.max(fd.abs());
        }
    }
    outcome(
        worst <= 1e-6,
        format!("max |g - fd| = {worst:.3e} (tolerance 1e-6), max |fd| = {largest:.3e}"),
    )
}

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (mut unitarity, mut trace, mut group) = (0.0f64, 0.0f64, 0.0f64);
    for k in 0..100 {
        let dim = [2, 4, 8][k % 3];
        let h = random_hermitian(dim, &mut rng);
        let (a, b) = (rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let ua = matrix_exp_hermitian(&h, a).unwrap();
        let ub = matrix_exp_hermitian(&h, b).unwrap();
        let uab = matrix_exp_hermitian(&h, a + b).unwrap();
        unitarity = unitarity.max(ua.matrix().unitarity_defect());
        group = group.max(uab.matrix().max_abs_diff(&(ua.matrix() * ub.matrix())));
        let rho = random_state(dim, &mut rng);
        trace = trace.max((ua.apply(&rho).matrix().trace() - Complex64::new(1.0, 0.0)).norm());
    }
    let scheme = TomographyScheme::bell();
    let target = bell_target();
    let mut tomography: f64 = 0.0;
    for _ in 0..50 {
        let rho = random_state(4, &mut rng);
        let direct = rho.matrix().trace_product(target.matrix()).re;
        tomography = tomography.max((scheme.assemble(&rho).unwrap() - direct).abs());
    }
    let pass = unitarity <= 1e-10 && trace <= 1e-10 && group <= 1e-10 && tomography <= 1e-12;
    outcome(
        pass,
        format!("unitarity {unitarity:.1e}, trace {trace:.1e}, exp(a+b) {group:.1e}, tomography {tomography:.1e}"),
    )
}

fn criterion_6() -> Outcome {
    let grid = [0.0, 0.5, 1.0];
    let mut pass = true;
    let mut parts = Vec::new();
    for alg in Algorithm::ALL {
        let overrides = Overrides {
            runs: Some(30),
            max_iterations: Some(None),
            ..Default::default()
        };
        let exp = bell_benchmark_with(alg, &overrides).unwrap();
        let points = sweep(&exp, SweepParameter::TrOverDt, &grid).unwrap();
        let means: Vec<f64> = points.iter().map(|(_, s)| s.mean_evals.unwrap_or(f64::NAN)).collect();
        let (first, last) = (means[0], means[2]);
        let ok = match alg {
            Algorithm::Grape => last > first,
            _ => ((last - first) / first).abs() < 0.5,
        };
        pass &= ok;
        parts.push(format!(
            "{alg} {:.0}/{:.0}/{:.0} ({:+.1}%){}",
            means[0],
            means[1],
            means[2],
            100.0 * (last - first) / first,
            if ok { "" } else { " x" }
        ));
    }
    outcome(pass, format!("mean evals at t_r/dt = 0/0.5/1: {}", parts.join(", ")))
}

fn criterion_7() -> Outcome {
    let mut rates = Vec::new();
    for alg in [Algorithm::Nmplus, Algorithm::De] {
        let overrides = Overrides {
            runs: Some(30),
            noise_sigma: Some(0.001),
            max_evals: Some(100_000),
            max_iterations: Some(None),
            ..Default::default()
        };
        let exp = bell_benchmark_with(alg, &overrides).unwrap();
        let traces = run_batch_traces(&exp).unwrap();
        rates.push(BatchSummary::from_traces(&traces, exp.stopping.threshold_infidelity).success_rate);
    }
    let (nm, de) = (rates[0], rates[1]);
    outcome(de > nm && de >= 0.8, format!("success nmplus={nm:.3} de={de:.3}"))
}

fn criterion_8() -> Outcome {
    let exp = bell_benchmark(Algorithm::Grape);
    let dt = exp.system.slice_duration();
    let u = 37.5;

    // Step response at t = t_r, analytically and through the sub-slice means.
    let mut step = (filter_response(&[u], dt, dt, dt) - u * (1.0 - (-1.0f64).exp())).abs();
    let mut step_exp = exp.clone();
    step_exp.distortion = DistortionConfig::new(dt, 32).unwrap();
    let layout = exp.system.layout();
    let mut amps = vec![0.0; layout.len()];
    amps[0] = u;
    let constant = ControlPulse::new(layout, amps).unwrap();
    let wf = distort_pulse(&exp.system, &constant, &step_exp.distortion).unwrap();
    let area: f64 = (0..wf.steps_per_slice()).map(|k| wf.value(k, 0) * wf.step()).sum();
    // ∫₀^{t_r} v dt = u t_r e^{−1}
    step = step.max((area / dt - u * (-1.0f64).exp()).abs());

    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut zero: f64 = 0.0;
    let mut refine: f64 = 0.0;
    for _ in 0..10 {
        let pulse = random_pulse(&exp, &mut rng);
        let plain = evolve(&pulse_hamiltonians(&exp.system, &pulse).unwrap(), &exp.initial_state).unwrap();
        let mut off = exp.clone();
        off.distortion = DistortionConfig::new(0.0, 32).unwrap();
        let rho = off.oracle(0, 0).unwrap().final_state(&pulse).unwrap();
        zero = zero.max(rho.matrix().max_abs_diff(plain.matrix()));

        let fidelity = |sub_steps: usize| {
            let mut e = exp.clone();
            e.distortion = DistortionConfig::new(dt, sub_steps).unwrap();
            let mut oracle: SpinOracle = e.oracle(0, 0).unwrap();
            oracle.exact_fidelity(&pulse).unwrap()
        };
        refine = refine.max((fidelity(32) - fidelity(64)).abs());
    }
    outcome(
        step <= 1e-9 && zero <= 1e-12 && refine < 1e-6,
        format!("step {step:.1e}, t_r=0 {zero:.1e}, sub-steps 32 vs 64 {refine:.1e}"),
    )
}

fn criterion_9(batches: &[(Algorithm, Vec<RunTrace>, BatchSummary)]) -> Outcome {
    let mut identical = true;
    for alg in Algorithm::ALL {
        let overrides = Overrides {
            noise_sigma: Some(0.001),
            t_r_over_dt: Some(0.5),
            max_evals: Some(3_000),
            master_seed: Some(99),
            ..Default::default()
        };
        let exp = bell_benchmark_with(alg, &overrides).unwrap();
        for run in 0..2 {
            let a = trace_csv(&run_single(&exp, run).unwrap());
            let b = trace_csv(&run_single(&exp, run).unwrap());
            identical &= a.as_bytes() == b.as_bytes();
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut invariant = true;
    for (alg, traces, summary) in batches {
        let threshold = bell_benchmark(*alg).stopping.threshold_infidelity;
        for _ in 0..5 {
            let mut shuffled = traces.clone();
            shuffled.shuffle(&mut rng);
            invariant &= BatchSummary::from_traces(&shuffled, threshold) == *summary;
        }
    }
    outcome(
        identical && invariant,
        format!("byte-identical traces: {identical}, permutation-invariant summaries: {invariant}"),
    )
}

fn main() {
    let mut failed_gating = Vec::new();
    let mut report = |n: usize, started: Instant, o: Outcome| {
        let status = if o.pass { "PASS" } else { "FAIL" };
        let note = if !o.pass && REPORT_ONLY.contains(&n) {
            " [report-only]"
        } else {
            ""
        };
        println!(
            "{status} criterion {n}{note}: {} [{:.1}s]",
            o.detail,
            started.elapsed().as_secs_f64()
        );
        let _ = std::io::stdout().flush();
        if !o.pass && !REPORT_ONLY.contains(&n) {
            failed_gating.push(n);
        }
    };

    let t = Instant::now();
    let batches = noiseless_batches();
    report(1, t, criterion_1(&batches));
    report(2, t, criterion_2(&batches));
    report(3, t, criterion_3(&batches));
    let t = Instant::now();
    report(4, t, criterion_4());
    let t = Instant::now();
    report(5, t, criterion_5());
    let t = Instant::now();
    report(6, t, criterion_6());
    let t = Instant::now();
    report(7, t, criterion_7());
    let t = Instant::now();
    report(8, t, criterion_8());
    let t = Instant::now();
    report(9, t, criterion_9(&batches));

    if failed_gating.is_empty() {
        println!("acceptance: ok");
    } else {
        println!("acceptance: failed criteria {failed_gating:?}");
        std::process::exit(1);
    }
}
