// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! Closed-loop GRAPE with gradients measured by inserting `±π/2` local
//! rotations after each control slice.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::oracle::{FidelityOracle, Insertion};
use super::session::{stop_reason, Flow, RunTrace, Session, StoppingRule};
use crate::error::{Error, Result};
use crate::qsim::{ControlPulse, PulseLayout, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GrapeConfig {
    /// Initial step length in Hz² (fidelity gradient is per Hz).
    pub lambda0: f64,
    /// Factor applied to the step on every halving.
    pub decay: f64,
    /// Maximum number of step reductions.
    pub max_decays: u32,
}

impl Default for GrapeConfig {
    fn default() -> Self {
        Self {
            lambda0: 2e4,
            decay: 0.5,
            max_decays: 40,
        }
    }
}

impl GrapeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda0.is_finite() && self.lambda0 > 0.0) {
            return Err(Error::InvalidConfig(format!("lambda0 {} must be > 0", self.lambda0)));
        }
        if !(self.decay > 0.0 && self.decay <= 1.0) {
            return Err(Error::InvalidConfig(format!("decay {} must lie in (0, 1]", self.decay)));
        }
        Ok(())
    }

    /// Step length after `reductions` halvings (saturating at `max_decays`).
    pub fn step(&self, reductions: u32) -> f64 {
        self.lambda0 * self.decay.powi(reductions.min(self.max_decays) as i32)
    }
}

/// `∂f/∂u` from a pair of rotation-inserted measurements:
/// `2π Δt (f₊ − f₋)`.
pub fn gradient_component(slice_duration: f64, f_plus: f64, f_minus: f64) -> f64 {
    2.0 * PI * slice_duration * (f_plus - f_minus)
}

/// Walks every control parameter in layout order and asks `measure` for the
/// `R(+π/2)` and `R(−π/2)` insertions after its slice.
fn insertion_gradient<E>(
    layout: PulseLayout,
    slice_duration: f64,
    mut measure: impl FnMut(Insertion) -> std::result::Result<f64, E>,
) -> std::result::Result<Vec<f64>, E> {
    (0..layout.len())
        .map(|k| {
            let (qubit, axis, slice) = layout.locate(k);
            let mut at = |sign| {
                measure(Insertion {
                    after_slices: slice + 1,
                    axis,
                    sign,
                    qubit,
                })
            };
            let plus = at(Sign::Plus)?;
            let minus = at(Sign::Minus)?;
            Ok(gradient_component(slice_duration, plus, minus))
        })
        .collect()
}

/// Measures the full gradient (`4nM` fidelity measurements).
pub fn grape_measure_gradient<O: FidelityOracle>(oracle: &mut O, pulse: &ControlPulse) -> Result<Vec<f64>> {
    let layout = oracle.layout();
    let dt = oracle.slice_duration();
    insertion_gradient(layout, dt, |ins| {
        oracle.evaluate_with_insertion(pulse, ins).map(|m| m.value)
    })
}

/// Gradient ascent `u ← u + λ g` from `initial`.
///
/// Each iteration measures the current pulse once and the gradient once:
/// `3(4nM + 1)` function evaluations with the Bell scheme. The step length
/// is reduced by `decay` whenever the measured fidelity fails to improve on
/// the previous iteration, at most `max_decays` times. Updates are not
/// clipped to any bounds.
pub fn grape_run<O: FidelityOracle>(
    oracle: &mut O,
    config: &GrapeConfig,
    initial: ControlPulse,
    stop: StoppingRule,
) -> Result<RunTrace> {
    config.validate()?;
    stop.validate()?;
    if initial.layout() != oracle.layout() {
        return Err(Error::DimensionMismatch {
            expected: oracle.layout().len(),
            found: initial.as_slice().len(),
        });
    }
    let layout = oracle.layout();
    let dt = oracle.slice_duration();
    let mut session = Session::new(oracle, stop);
    let mut pulse = initial;
    let mut last_measured = f64::NAN;

    let flow = (|| -> Flow<std::convert::Infallible> {
        let mut reductions = 0u32;
        let mut previous = f64::NEG_INFINITY;
        loop {
            let f = session.measure(&pulse)?;
            last_measured = f;
            if f <= previous {
                reductions += 1;
            }
            previous = f;

            let grad = insertion_gradient(layout, dt, |ins| session.measure_insertion(&pulse, ins))?;
            let measured_pulse = pulse.clone();
            let lambda = config.step(reductions);
            for (u, g) in pulse.as_mut_slice().iter_mut().zip(&grad) {
                *u += lambda * g;
            }
            session.complete_iteration(None, f, &measured_pulse)?;
        }
    })();

    let reason = stop_reason(flow);
    Ok(session.finish(reason, pulse, last_measured))
}
