// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! First-order low-pass model of control-line distortion.
//!
//! Every channel obeys `t_r v'(t) = u(t) − v(t)` with `v(0) = 0`, i.e. the
//! commanded waveform convolved with `h(t) = e^{−t/t_r} / t_r`. Each control
//! slice is split into `S` sub-slices and the filtered amplitude on a
//! sub-slice is the exact mean of `v(t)` over it.
//!
//! Within a sub-slice every channel relaxes as `v(τ) = u + g e^{−τ/t_r}`, so
//! `H(τ) = A + e^{−τ/t_r} B` with a shared profile. The step Hamiltonians
//! carry the second Magnus term of that form in closed form, which makes the
//! sub-sliced propagation fourth order in `1/S`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qsim::{CMatrix, ControlPulse, HamiltonianModel, SpinSystem};

pub const DEFAULT_SUB_STEPS: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistortionConfig {
    /// Filter time constant in seconds; zero disables the filter.
    pub t_r: f64,
    /// Sub-slices per control slice.
    pub sub_steps: usize,
}

impl Default for DistortionConfig {
    fn default() -> Self {
        Self {
            t_r: 0.0,
            sub_steps: DEFAULT_SUB_STEPS,
        }
    }
}

impl DistortionConfig {
    pub fn new(t_r: f64, sub_steps: usize) -> Result<Self> {
        let cfg = Self { t_r, sub_steps };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_r.is_finite() && self.t_r >= 0.0) {
            return Err(Error::InvalidConfig(format!("t_r = {} must be >= 0", self.t_r)));
        }
        if self.sub_steps == 0 {
            return Err(Error::InvalidConfig("sub_steps must be positive".into()));
        }
        Ok(())
    }

    pub fn is_active(&self) -> bool {
        self.t_r > 0.0
    }
}

/// Piecewise-constant multichannel waveform on a uniform step grid.
///
/// Channel order within a step is `(x_0, y_0, x_1, y_1, …)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    channels: usize,
    step: f64,
    steps_per_slice: usize,
    values: Vec<f64>,
    /// `v − u` at the start of each step; all zero without a filter.
    gaps: Vec<f64>,
    t_r: f64,
}

impl Waveform {
    pub fn channels(&self) -> usize {
        self.channels
    }

    /// Duration of one step.
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn steps_per_slice(&self) -> usize {
        self.steps_per_slice
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.channels
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn step_values(&self, k: usize) -> &[f64] {
        &self.values[k * self.channels..(k + 1) * self.channels]
    }

    /// Amplitude of `channel` on step `k`.
    pub fn value(&self, k: usize, channel: usize) -> f64 {
        self.values[k * self.channels + channel]
    }

    /// Filter output minus commanded input at the start of step `k`.
    pub fn step_gaps(&self, k: usize) -> &[f64] {
        &self.gaps[k * self.channels..(k + 1) * self.channels]
    }

    pub fn time_constant(&self) -> f64 {
        self.t_r
    }
}

/// Filters every control channel and resamples onto `M·S` sub-slices.
pub fn distort_pulse(system: &SpinSystem, pulse: &ControlPulse, cfg: &DistortionConfig) -> Result<Waveform> {
    cfg.validate()?;
    if pulse.layout() != system.layout() {
        return Err(Error::DimensionMismatch {
            expected: system.layout().len(),
            found: pulse.as_slice().len(),
        });
    }
    let slices = system.slice_count();
    let s = cfg.sub_steps;
    let channels = 2 * system.n_qubits();
    let dt = system.slice_duration();
    let h = dt / s as f64;
    let mut values = vec![0.0; slices * s * channels];
    let mut gaps = vec![0.0; slices * s * channels];

    for ch in 0..channels {
        let block = &pulse.as_slice()[ch * slices..(ch + 1) * slices];
        if cfg.is_active() {
            let (means, starts) = filtered_averages(block, dt, cfg.t_r, s);
            for (k, (v, g)) in means.into_iter().zip(starts).enumerate() {
                values[k * channels + ch] = v;
                gaps[k * channels + ch] = g;
            }
        } else {
            for (k, v) in block.iter().flat_map(|&u| std::iter::repeat_n(u, s)).enumerate() {
                values[k * channels + ch] = v;
            }
        }
    }

    Ok(Waveform {
        channels,
        step: h,
        steps_per_slice: s,
        values,
        gaps,
        t_r: if cfg.is_active() { cfg.t_r } else { 0.0 },
    })
}

/// Sub-slice means of the filter output for one channel starting at rest,
/// with the gap `v − u` at the start of each sub-slice.
fn filtered_averages(inputs: &[f64], dt: f64, t_r: f64, sub_steps: usize) -> (Vec<f64>, Vec<f64>) {
    let h = dt / sub_steps as f64;
    // (t_r / h) (1 − e^{−h/t_r}): mean of e^{−τ/t_r} over one sub-slice,
    // relative to its value at the sub-slice start.
    let mean_factor = -(t_r / h) * (-h / t_r).exp_m1();
    let sub_decay = (-h / t_r).exp();
    let mut out = Vec::with_capacity(inputs.len() * sub_steps);
    let mut starts = Vec::with_capacity(inputs.len() * sub_steps);
    let mut v = 0.0;
    for &u in inputs {
        let mut gap = v - u;
        for _ in 0..sub_steps {
            out.push(u + gap * mean_factor);
            starts.push(gap);
            gap *= sub_decay;
        }
        v = u + gap;
    }
    (out, starts)
}

/// `∫₀^h ∫₀^{t₁} (f(t₂) − f(t₁)) dt₂ dt₁ / (2h)` for `f(τ) = e^{−τ/t_r}`.
///
/// Closed form `t_r² (x − 2 + (2 + x) e^{−x})` with `x = h/t_r`; the series
/// `Σ_{k≥3} (−1)^{k+1} (k − 2) x^k / k!` avoids the cancellation at small `x`.
fn magnus_weight(h: f64, t_r: f64) -> f64 {
    let x = h / t_r;
    let phi = if x < 0.5 {
        let mut term = x * x / 2.0;
        let mut sum = 0.0;
        for k in 3..40 {
            term *= -x / k as f64;
            let next = -term * (k as f64 - 2.0);
            sum += next;
            if next.abs() < 1e-18 * sum.abs() {
                break;
            }
        }
        sum
    } else {
        x - 2.0 + (2.0 + x) * (-x).exp()
    };
    t_r * t_r * phi / (2.0 * h)
}

/// Analytic filter output `v(t)` for a piecewise-constant channel.
pub fn filter_response(inputs: &[f64], dt: f64, t_r: f64, t: f64) -> f64 {
    if t_r == 0.0 {
        let m = ((t / dt) as usize).min(inputs.len().saturating_sub(1));
        return inputs.get(m).copied().unwrap_or(0.0);
    }
    let mut v = 0.0;
    let mut start = 0.0;
    for &u in inputs {
        let span = (t - start).min(dt);
        if span <= 0.0 {
            break;
        }
        v = u + (v - u) * (-span / t_r).exp();
        start += dt;
    }
    if t > start {
        // Past the pulse the input is zero.
        v *= (-(t - start) / t_r).exp();
    }
    v
}

/// One `(H, dt)` pair per waveform step.
pub fn waveform_hamiltonians(system: &SpinSystem, waveform: &Waveform) -> Result<Vec<(CMatrix, f64)>> {
    let model = HamiltonianModel::new(system);
    waveform_hamiltonians_with(&model, waveform)
}

pub(crate) fn waveform_hamiltonians_with(model: &HamiltonianModel, waveform: &Waveform) -> Result<Vec<(CMatrix, f64)>> {
    if waveform.channels() != model.channels() {
        return Err(Error::DimensionMismatch {
            expected: model.channels(),
            found: waveform.channels(),
        });
    }
    let weight = if waveform.t_r > 0.0 {
        magnus_weight(waveform.step, waveform.t_r)
    } else {
        0.0
    };
    (0..waveform.len())
        .map(|k| {
            let vals = waveform.step_values(k);
            if vals.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidConfig(format!("non-finite amplitude on step {k}")));
            }
            let mut h = model.hamiltonian(vals)?;
            let gaps = waveform.step_gaps(k);
            if weight != 0.0 {
                // H̄ − i w [H̄, B] with B the decaying part of the controls.
                model.add_commutator_with_controls(&mut h, vals, gaps, Complex64::new(0.0, -weight))?;
            }
            Ok((h, waveform.step()))
        })
        .collect()
}
