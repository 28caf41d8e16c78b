// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! Stopping rules and run bookkeeping shared by all three learners.
//!
//! Optimizers never talk to the oracle directly during a run; they go
//! through a [`Session`], which checks the stopping rule after every
//! measurement and unwinds the optimizer with the [`StopReason`] as soon as
//! one fires.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::nmplus::NmBranch;
use super::oracle::{FidelityOracle, Insertion};
use crate::error::{Error, Result};
use crate::qsim::ControlPulse;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingRule {
    /// Stop as soon as a measured pulse has infidelity at or below this.
    pub threshold_infidelity: Option<f64>,
    /// Stop once the evaluation counter exceeds this.
    pub max_evals: u64,
    /// Stop after this many completed iterations.
    pub max_iterations: Option<usize>,
}

impl StoppingRule {
    pub fn new(threshold_infidelity: f64, max_evals: u64, max_iterations: usize) -> Result<Self> {
        let rule = Self {
            threshold_infidelity: Some(threshold_infidelity),
            max_evals,
            max_iterations: Some(max_iterations),
        };
        rule.validate()?;
        Ok(rule)
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(t) = self.threshold_infidelity {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidConfig(format!(
                    "threshold infidelity {t} must lie in (0, 1)"
                )));
            }
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidConfig("max_evals must be positive".into()));
        }
        if self.max_iterations == Some(0) {
            return Err(Error::InvalidConfig("max_iterations must be positive".into()));
        }
        Ok(())
    }

    /// Decision after a measurement of an actual candidate pulse.
    pub fn check_measurement(&self, measured: f64, evals: u64) -> Option<StopReason> {
        if let Some(t) = self.threshold_infidelity {
            if 1.0 - measured <= t {
                return Some(StopReason::ThresholdReached);
            }
        }
        self.check_budget(evals)
    }

    pub fn check_budget(&self, evals: u64) -> Option<StopReason> {
        (evals > self.max_evals).then_some(StopReason::EvalBudgetExhausted)
    }

    pub fn check_iterations(&self, completed: usize) -> Option<StopReason> {
        match self.max_iterations {
            Some(cap) if completed >= cap => Some(StopReason::MaxIterations),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    ThresholdReached,
    EvalBudgetExhausted,
    MaxIterations,
    /// Non-finite measurement or an oracle error.
    Aborted,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::ThresholdReached => "threshold_reached",
            StopReason::EvalBudgetExhausted => "eval_budget_exhausted",
            StopReason::MaxIterations => "max_iterations",
            StopReason::Aborted => "aborted",
        })
    }
}

impl FromStr for StopReason {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "threshold_reached" => StopReason::ThresholdReached,
            "eval_budget_exhausted" => StopReason::EvalBudgetExhausted,
            "max_iterations" => StopReason::MaxIterations,
            "aborted" => StopReason::Aborted,
            _ => return Err(Error::InvalidConfig(format!("unknown stop reason {s:?}"))),
        })
    }
}

/// One point of a convergence history.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub iteration: usize,
    pub cumulative_evals: u64,
    pub best_measured_fidelity: f64,
    pub best_exact_fidelity: f64,
}

/// Evaluations spent by one completed iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    pub evals: u64,
    /// Set by NMplus only.
    pub branch: Option<NmBranch>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunTrace {
    pub samples: Vec<Sample>,
    pub iterations: Vec<IterationRecord>,
    /// Evaluations spent before the first iteration (initial simplex or
    /// population).
    pub setup_evals: u64,
    pub terminal_pulse: ControlPulse,
    pub stop_reason: StopReason,
    pub total_evals: u64,
    pub final_measured_fidelity: f64,
    pub final_exact_fidelity: f64,
    pub diagnostic: Option<String>,
}

impl RunTrace {
    pub fn succeeded(&self) -> bool {
        self.stop_reason == StopReason::ThresholdReached
    }

    /// Smallest cumulative evaluation count at which the recorded measured
    /// fidelity reached `fidelity`.
    pub fn evals_to_threshold(&self, fidelity: f64) -> Option<u64> {
        evals_to_threshold(&self.samples, fidelity)
    }
}

pub fn evals_to_threshold(samples: &[Sample], fidelity: f64) -> Option<u64> {
    samples
        .iter()
        .find(|s| s.best_measured_fidelity >= fidelity)
        .map(|s| s.cumulative_evals)
}

/// Control flow of an optimizer body: it runs until a stop reason fires.
pub(crate) type Flow<T = ()> = std::result::Result<T, StopReason>;

pub(crate) struct Session<'a, O: FidelityOracle> {
    oracle: &'a mut O,
    rule: StoppingRule,
    start_evals: u64,
    samples: Vec<Sample>,
    iterations: Vec<IterationRecord>,
    setup_evals: Option<u64>,
    completed: usize,
    evals_at_iteration_start: u64,
    /// Pulse and value of the measurement that crossed the threshold.
    crossing: Option<(ControlPulse, f64)>,
    diagnostic: Option<String>,
}

impl<'a, O: FidelityOracle> Session<'a, O> {
    pub fn new(oracle: &'a mut O, rule: StoppingRule) -> Self {
        let start = oracle.evaluations();
        Self {
            oracle,
            rule,
            start_evals: start,
            samples: Vec::new(),
            iterations: Vec::new(),
            setup_evals: None,
            completed: 0,
            evals_at_iteration_start: start,
            crossing: None,
            diagnostic: None,
        }
    }

    /// Evaluations charged since the session started.
    pub fn evals(&self) -> u64 {
        self.oracle.evaluations() - self.start_evals
    }

    fn abort(&mut self, msg: String) -> StopReason {
        self.diagnostic = Some(msg);
        StopReason::Aborted
    }

    /// Measured fidelity of a candidate pulse.
    pub fn measure(&mut self, pulse: &ControlPulse) -> Flow<f64> {
        let value = match self.oracle.evaluate(pulse) {
            Ok(m) => m.value,
            Err(e) => return Err(self.abort(e.to_string())),
        };
        if !value.is_finite() {
            return Err(self.abort(format!("non-finite fidelity {value}")));
        }
        let evals = self.evals();
        match self.rule.check_measurement(value, evals) {
            Some(StopReason::ThresholdReached) => {
                self.crossing = Some((pulse.clone(), value));
                let exact = self.exact(pulse);
                self.push_sample(value, exact);
                Err(StopReason::ThresholdReached)
            }
            Some(reason) => Err(reason),
            None => Ok(value),
        }
    }

    /// Measured fidelity with a rotation spliced in; budget check only.
    pub fn measure_insertion(&mut self, pulse: &ControlPulse, insertion: Insertion) -> Flow<f64> {
        let value = match self.oracle.evaluate_with_insertion(pulse, insertion) {
            Ok(m) => m.value,
            Err(e) => return Err(self.abort(e.to_string())),
        };
        if !value.is_finite() {
            return Err(self.abort(format!("non-finite fidelity {value} under insertion")));
        }
        match self.rule.check_budget(self.evals()) {
            Some(reason) => Err(reason),
            None => Ok(value),
        }
    }

    pub fn exact(&mut self, pulse: &ControlPulse) -> f64 {
        self.oracle.exact_fidelity(pulse).unwrap_or(f64::NAN)
    }

    fn push_sample(&mut self, measured: f64, exact: f64) {
        let sample = Sample {
            iteration: self.completed,
            cumulative_evals: self.evals(),
            best_measured_fidelity: measured,
            best_exact_fidelity: exact,
        };
        match self.samples.last_mut() {
            Some(last) if last.cumulative_evals == sample.cumulative_evals => *last = sample,
            _ => self.samples.push(sample),
        }
    }

    /// Marks the end of initial evaluations (simplex, population).
    pub fn finish_setup(&mut self, best_measured: f64, best: &ControlPulse) {
        self.setup_evals = Some(self.evals());
        self.evals_at_iteration_start = self.oracle.evaluations();
        let exact = self.exact(best);
        self.push_sample(best_measured, exact);
    }

    /// Logs a completed iteration and enforces the iteration cap.
    pub fn complete_iteration(&mut self, branch: Option<NmBranch>, best_measured: f64, best: &ControlPulse) -> Flow {
        let now = self.oracle.evaluations();
        self.iterations.push(IterationRecord {
            iteration: self.completed,
            evals: now - self.evals_at_iteration_start,
            branch,
        });
        self.evals_at_iteration_start = now;
        self.completed += 1;
        let exact = self.exact(best);
        self.push_sample(best_measured, exact);
        match self.rule.check_iterations(self.completed) {
            Some(reason) => Err(reason),
            None => Ok(()),
        }
    }

    /// Closes the run. `fallback` is the pulse to report when the stop was
    /// not a threshold crossing, with its last measured fidelity.
    pub fn finish(mut self, reason: StopReason, fallback: ControlPulse, fallback_measured: f64) -> RunTrace {
        let (terminal_pulse, final_measured) = match (reason, self.crossing.take()) {
            (StopReason::ThresholdReached, Some((p, v))) => (p, v),
            _ => (fallback, fallback_measured),
        };
        let final_exact = self.exact(&terminal_pulse);
        RunTrace {
            total_evals: self.evals(),
            setup_evals: self.setup_evals.unwrap_or(0),
            samples: self.samples,
            iterations: self.iterations,
            terminal_pulse,
            stop_reason: reason,
            final_measured_fidelity: final_measured,
            final_exact_fidelity: final_exact,
            diagnostic: self.diagnostic,
        }
    }
}

/// Extracts the stop reason from an optimizer body that only ever exits
/// through one.
pub(crate) fn stop_reason(flow: Flow<std::convert::Infallible>) -> StopReason {
    match flow {
        Ok(never) => match never {},
        Err(reason) => reason,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_fires_on_measured_fidelity() {
        let rule = StoppingRule::new(0.001, 100_000, 300).unwrap();
        assert_eq!(
            rule.check_measurement(0.9992, 4_000),
            Some(StopReason::ThresholdReached)
        );
        assert_eq!(rule.check_measurement(0.998, 4_000), None);
    }

    #[test]
    fn budget_fires_when_exceeded() {
        let rule = StoppingRule::new(0.001, 100_000, 300).unwrap();
        assert_eq!(rule.check_measurement(0.5, 100_000), None);
        assert_eq!(
            rule.check_measurement(0.5, 100_003),
            Some(StopReason::EvalBudgetExhausted)
        );
    }

    #[test]
    fn threshold_wins_over_budget() {
        let rule = StoppingRule::new(0.001, 10, 300).unwrap();
        assert_eq!(rule.check_measurement(0.9995, 12), Some(StopReason::ThresholdReached));
    }

    #[test]
    fn iteration_cap() {
        let rule = StoppingRule::new(0.001, 10, 15).unwrap();
        assert_eq!(rule.check_iterations(14), None);
        assert_eq!(rule.check_iterations(15), Some(StopReason::MaxIterations));
    }

    #[test]
    fn validation() {
        assert!(StoppingRule::new(0.0, 10, 1).is_err());
        assert!(StoppingRule::new(1.0, 10, 1).is_err());
        assert!(StoppingRule::new(0.1, 0, 1).is_err());
        assert!(StoppingRule::new(0.1, 1, 0).is_err());
    }

    #[test]
    fn crossing_lookup() {
        let s = |e, f| Sample {
            iteration: 0,
            cumulative_evals: e,
            best_measured_fidelity: f,
            best_exact_fidelity: f,
        };
        let samples = [s(3, 0.2), s(6, 0.7)];
        assert_eq!(evals_to_threshold(&samples, 0.65), Some(6));
        assert_eq!(evals_to_threshold(&samples, 0.99), None);
    }

    #[test]
    fn stop_reason_names_round_trip() {
        for r in [
            StopReason::ThresholdReached,
            StopReason::EvalBudgetExhausted,
            StopReason::MaxIterations,
            StopReason::Aborted,
        ] {
            assert_eq!(r.to_string().parse::<StopReason>().unwrap(), r);
        }
    }
}
