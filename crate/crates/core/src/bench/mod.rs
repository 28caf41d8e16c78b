// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! The Bell-state benchmark: experiment definition, seeded batches, sweeps
//! and the statistics reported over them.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::distort::DistortionConfig;
use crate::error::{Error, Result};
use crate::measure::{MeasurementChannel, TomographyScheme};
use crate::optim::{
    de_run, grape_run, nmplus_run, DeConfig, GrapeConfig, NmplusConfig, RunTrace, SpinOracle, StopReason, StoppingRule,
};
use crate::qsim::{bell_target, ControlPulse, Coupling, DensityMatrix, SpinSystem};
use crate::seed::{stream, Purpose};

pub mod curve;

pub use curve::{average_curve, Curve};

/// Fidelity levels at which crossing statistics are reported.
pub const CROSSING_LEVELS: [f64; 3] = [0.65, 0.85, 0.99];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algorithm {
    Grape,
    Nmplus,
    De,
}

impl Algorithm {
    pub const ALL: [Algorithm; 3] = [Algorithm::Grape, Algorithm::Nmplus, Algorithm::De];

    /// Benchmark iteration cap.
    pub fn default_iterations(self) -> usize {
        match self {
            Algorithm::Grape => 15,
            Algorithm::Nmplus => 300,
            Algorithm::De => 75,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Grape => "grape",
            Algorithm::Nmplus => "nmplus",
            Algorithm::De => "de",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown algorithm `{s}`")))
    }
}

/// Everything needed to reproduce a batch of closed-loop runs.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub system: SpinSystem,
    pub initial_state: DensityMatrix,
    pub target: DensityMatrix,
    /// Amplitude bounds in Hz for random initial controls and for the
    /// simplex and population of the derivative-free learners.
    pub bounds: (f64, f64),
    pub algorithm: Algorithm,
    pub grape: GrapeConfig,
    pub nmplus: NmplusConfig,
    pub de: DeConfig,
    pub distortion: DistortionConfig,
    pub noise_sigma: f64,
    pub stopping: StoppingRule,
    pub runs: usize,
    pub master_seed: u64,
}

/// Changes applied on top of the benchmark defaults.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub slices: Option<usize>,
    pub total_time: Option<f64>,
    /// Filter rise time as a multiple of the slice duration.
    pub t_r_over_dt: Option<f64>,
    pub sub_steps: Option<usize>,
    pub noise_sigma: Option<f64>,
    pub runs: Option<usize>,
    pub master_seed: Option<u64>,
    /// `Some(None)` removes the iteration cap.
    pub max_iterations: Option<Option<usize>>,
    pub max_evals: Option<u64>,
}

/// J coupling of the two-qubit benchmark, Hz.
pub const BELL_J: f64 = 214.5;

/// The two-qubit Bell-state benchmark with the per-algorithm defaults.
pub fn bell_benchmark(algorithm: Algorithm) -> Experiment {
    let system =
        SpinSystem::new(2, vec![Coupling { i: 0, j: 1, hz: BELL_J }], 5e-3, 10).expect("benchmark system is valid");
    Experiment {
        system,
        initial_state: DensityMatrix::ground(2),
        target: bell_target(),
        bounds: (-50.0, 50.0),
        algorithm,
        grape: GrapeConfig::default(),
        nmplus: NmplusConfig::default(),
        de: DeConfig::default(),
        distortion: DistortionConfig::default(),
        noise_sigma: 0.0,
        stopping: StoppingRule {
            threshold_infidelity: Some(1e-3),
            max_evals: 100_000,
            max_iterations: Some(algorithm.default_iterations()),
        },
        runs: 50,
        master_seed: 2017,
    }
}

/// [`bell_benchmark`] with `overrides` applied and validated.
pub fn bell_benchmark_with(algorithm: Algorithm, overrides: &Overrides) -> Result<Experiment> {
    let mut exp = bell_benchmark(algorithm);
    if overrides.slices.is_some() || overrides.total_time.is_some() {
        exp.system = SpinSystem::new(
            exp.system.n_qubits(),
            exp.system.couplings().to_vec(),
            overrides.total_time.unwrap_or(exp.system.total_time()),
            overrides.slices.unwrap_or(exp.system.slice_count()),
        )?;
    }
    if let Some(s) = overrides.sub_steps {
        exp.distortion.sub_steps = s;
    }
    if let Some(r) = overrides.t_r_over_dt {
        exp.distortion.t_r = r * exp.system.slice_duration();
    }
    if let Some(g) = overrides.noise_sigma {
        exp.noise_sigma = g;
    }
    if let Some(r) = overrides.runs {
        exp.runs = r;
    }
    if let Some(s) = overrides.master_seed {
        exp.master_seed = s;
    }
    if let Some(m) = overrides.max_iterations {
        exp.stopping.max_iterations = m;
    }
    if let Some(m) = overrides.max_evals {
        exp.stopping.max_evals = m;
    }
    exp.validate()?;
    Ok(exp)
}

impl Experiment {
    pub fn validate(&self) -> Result<()> {
        let dim = self.system.dim();
        for (what, rho) in [("initial state", &self.initial_state), ("target", &self.target)] {
            if rho.dim() != dim {
                return Err(Error::InvalidConfig(format!(
                    "{what} has dimension {}, system needs {dim}",
                    rho.dim()
                )));
            }
        }
        let (lo, hi) = self.bounds;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "bounds ({lo}, {hi}) must satisfy lo < hi"
            )));
        }
        if self.runs == 0 {
            return Err(Error::InvalidConfig("runs must be at least 1".into()));
        }
        if !(self.noise_sigma.is_finite() && self.noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma {} must be finite and nonnegative",
                self.noise_sigma
            )));
        }
        self.grape.validate()?;
        self.nmplus_config().validate()?;
        self.de_config().validate()?;
        self.distortion.validate()?;
        self.stopping.validate()
    }

    /// NMplus settings with the experiment bounds applied.
    pub fn nmplus_config(&self) -> NmplusConfig {
        NmplusConfig {
            lo: self.bounds.0,
            hi: self.bounds.1,
            ..self.nmplus
        }
    }

    /// DE settings with the experiment bounds applied.
    pub fn de_config(&self) -> DeConfig {
        DeConfig {
            lo: self.bounds.0,
            hi: self.bounds.1,
            ..self.de
        }
    }

    /// Filter rise time in units of the slice duration.
    pub fn t_r_over_dt(&self) -> f64 {
        self.distortion.t_r / self.system.slice_duration()
    }

    /// Oracle for one run, with its own noise stream.
    pub fn oracle(&self, point: u64, run: u64) -> Result<SpinOracle> {
        let scheme = TomographyScheme::from_target(&self.target)?;
        let noise_rng = stream(self.master_seed, point, run, Purpose::Noise);
        let channel = MeasurementChannel::with_rng(scheme, self.noise_sigma, noise_rng)?;
        SpinOracle::new(
            self.system.clone(),
            self.initial_state.clone(),
            self.distortion,
            channel,
        )
    }
}

/// One seeded run of the configured algorithm.
pub fn run_single(experiment: &Experiment, run: u64) -> Result<RunTrace> {
    run_at(experiment, 0, run)
}

/// Run `run` of sweep point `point`; a plain batch is point 0.
pub fn run_at(exp: &Experiment, point: u64, run: u64) -> Result<RunTrace> {
    let mut oracle = exp.oracle(point, run)?;
    let mut rng = stream(exp.master_seed, point, run, Purpose::Algorithm);
    match exp.algorithm {
        Algorithm::Grape => {
            let layout = exp.system.layout();
            let (lo, hi) = exp.bounds;
            let amps = (0..layout.len()).map(|_| rng.gen_range(lo..=hi)).collect();
            let initial = ControlPulse::new(layout, amps)?;
            grape_run(&mut oracle, &exp.grape, initial, exp.stopping)
        }
        Algorithm::Nmplus => nmplus_run(&mut oracle, &exp.nmplus_config(), exp.stopping, &mut rng),
        Algorithm::De => de_run(&mut oracle, &exp.de_config(), exp.stopping, &mut rng),
    }
}

/// All runs of a batch in run order. Runs execute in parallel.
pub fn run_batch_traces(experiment: &Experiment) -> Result<Vec<RunTrace>> {
    batch_at(experiment, 0)
}

fn batch_at(exp: &Experiment, point: u64) -> Result<Vec<RunTrace>> {
    exp.validate()?;
    (0..exp.runs as u64)
        .into_par_iter()
        .map(|run| run_at(exp, point, run))
        .collect()
}

pub fn run_batch(experiment: &Experiment) -> Result<BatchSummary> {
    let traces = run_batch_traces(experiment)?;
    Ok(BatchSummary::from_traces(
        &traces,
        experiment.stopping.threshold_infidelity,
    ))
}

/// Cross-run statistics of one batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub runs: usize,
    /// Fraction of runs stopped by the measured-fidelity threshold.
    pub success_rate: f64,
    /// Fraction of runs whose final pulse meets the threshold exactly.
    pub exact_success_rate: f64,
    /// Mean and population variance of total evaluations over successful
    /// runs; absent when no run succeeded.
    pub mean_evals: Option<f64>,
    pub var_evals: Option<f64>,
    /// Mean evaluations to first reach each of [`CROSSING_LEVELS`], over the
    /// runs that reached it.
    pub crossings: [Option<f64>; 3],
    /// Number of runs reaching each of [`CROSSING_LEVELS`].
    pub crossing_counts: [usize; 3],
    pub mean_final_exact_fidelity: f64,
    pub curve: Curve,
}

/// Sum in a canonical order so results do not depend on run order.
fn canonical_mean(mut values: Vec<f64>) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    Some(values.iter().sum::<f64>() / values.len() as f64)
}

fn canonical_variance(mut values: Vec<f64>) -> Option<f64> {
    let mean = canonical_mean(values.clone())?;
    values.sort_by(f64::total_cmp);
    let mut dev: Vec<f64> = values.iter().map(|v| (v - mean).powi(2)).collect();
    dev.sort_by(f64::total_cmp);
    Some(dev.iter().sum::<f64>() / dev.len() as f64)
}

impl BatchSummary {
    /// Aggregates traces; the result is invariant under their order.
    pub fn from_traces(traces: &[RunTrace], threshold_infidelity: Option<f64>) -> Self {
        let runs = traces.len();
        let frac = |k: usize| if runs == 0 { 0.0 } else { k as f64 / runs as f64 };
        let successes: Vec<f64> = traces
            .iter()
            .filter(|t| t.stop_reason == StopReason::ThresholdReached)
            .map(|t| t.total_evals as f64)
            .collect();
        let exact_ok = match threshold_infidelity {
            Some(eps) => traces.iter().filter(|t| 1.0 - t.final_exact_fidelity <= eps).count(),
            None => 0,
        };
        let mut crossings = [None; 3];
        let mut crossing_counts = [0; 3];
        for (k, level) in CROSSING_LEVELS.into_iter().enumerate() {
            let hits: Vec<f64> = traces
                .iter()
                .filter_map(|t| t.evals_to_threshold(level))
                .map(|e| e as f64)
                .collect();
            crossing_counts[k] = hits.len();
            crossings[k] = canonical_mean(hits);
        }
        Self {
            runs,
            success_rate: frac(successes.len()),
            exact_success_rate: frac(exact_ok),
            mean_evals: canonical_mean(successes.clone()),
            var_evals: canonical_variance(successes),
            crossings,
            crossing_counts,
            mean_final_exact_fidelity: canonical_mean(traces.iter().map(|t| t.final_exact_fidelity).collect())
                .unwrap_or(f64::NAN),
            curve: average_curve(traces),
        }
    }

    /// Mean evaluations to reach `level`, which must be one of
    /// [`CROSSING_LEVELS`].
    pub fn evals_to(&self, level: f64) -> Option<f64> {
        CROSSING_LEVELS
            .iter()
            .position(|&l| l == level)
            .and_then(|k| self.crossings[k])
    }
}

/// Ratio of the mean evaluations `algorithm` needed to reach `level` over
/// those `reference` needed.
pub fn efficiency_factor(algorithm: &BatchSummary, reference: &BatchSummary, level: f64) -> Option<f64> {
    Some(algorithm.evals_to(level)? / reference.evals_to(level)?)
}

/// Quantity varied across a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SweepParameter {
    /// Filter rise time over slice duration.
    TrOverDt,
    /// Standard deviation of the additive fidelity noise.
    NoiseSigma,
}

impl SweepParameter {
    pub fn apply(self, experiment: &Experiment, value: f64) -> Result<Experiment> {
        if !(value.is_finite() && value >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sweep value {value} must be finite and nonnegative"
            )));
        }
        let mut exp = experiment.clone();
        match self {
            SweepParameter::TrOverDt => exp.distortion.t_r = value * exp.system.slice_duration(),
            SweepParameter::NoiseSigma => exp.noise_sigma = value,
        }
        exp.validate()?;
        Ok(exp)
    }
}

/// One batch per value, each with seeds from its own sweep point.
pub fn sweep_traces(
    experiment: &Experiment,
    parameter: SweepParameter,
    values: &[f64],
) -> Result<Vec<(f64, Vec<RunTrace>)>> {
    let points: Vec<Experiment> = values
        .iter()
        .map(|&v| parameter.apply(experiment, v))
        .collect::<Result<_>>()?;
    points
        .iter()
        .zip(values)
        .enumerate()
        .map(|(k, (exp, &v))| Ok((v, batch_at(exp, k as u64)?)))
        .collect()
}

pub fn sweep(experiment: &Experiment, parameter: SweepParameter, values: &[f64]) -> Result<Vec<(f64, BatchSummary)>> {
    let threshold = experiment.stopping.threshold_infidelity;
    Ok(sweep_traces(experiment, parameter, values)?
        .into_iter()
        .map(|(v, traces)| (v, BatchSummary::from_traces(&traces, threshold)))
        .collect())
}
