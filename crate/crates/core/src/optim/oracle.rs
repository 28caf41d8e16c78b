// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

use crate::distort::{distort_pulse, waveform_hamiltonians_with, DistortionConfig};
use crate::error::{Error, Result};
use crate::measure::{exact_fidelity, MeasuredFidelity, MeasurementChannel};
use crate::qsim::{
    local_rotation, Axis, ControlPulse, DensityMatrix, HamiltonianModel, Propagation, PulseLayout, PureEnsemble, Sign,
    SpinSystem, UnitaryOperator,
};
use num_complex::Complex64;

/// A `±π/2` rotation spliced into the pulse sequence right after
/// `after_slices` control slices have been applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Insertion {
    pub after_slices: usize,
    pub axis: Axis,
    pub sign: Sign,
    pub qubit: usize,
}

/// What a learning algorithm is allowed to see of the experiment.
///
/// Every `evaluate*` call is one fidelity measurement and is charged to the
/// evaluation counter. `exact_fidelity` is a bookkeeping side channel for
/// traces and is free.
pub trait FidelityOracle {
    fn layout(&self) -> PulseLayout;

    /// Control slice duration `Δt` in seconds.
    fn slice_duration(&self) -> f64;

    fn evaluate(&mut self, pulse: &ControlPulse) -> Result<MeasuredFidelity>;

    fn evaluate_with_insertion(&mut self, pulse: &ControlPulse, insertion: Insertion) -> Result<MeasuredFidelity>;

    fn exact_fidelity(&mut self, pulse: &ControlPulse) -> Result<f64>;

    fn evaluations(&self) -> u64;
}

/// The simulated closed loop: distortion, evolution, tomography, noise.
#[derive(Debug, Clone)]
pub struct SpinOracle {
    system: SpinSystem,
    model: HamiltonianModel,
    rho0: DensityMatrix,
    distortion: DistortionConfig,
    channel: MeasurementChannel,
    rho0_ensemble: PureEnsemble,
    rotations: Vec<UnitaryOperator>,
    cache: Option<(Vec<f64>, Propagation)>,
}

impl SpinOracle {
    pub fn new(
        system: SpinSystem,
        rho0: DensityMatrix,
        distortion: DistortionConfig,
        channel: MeasurementChannel,
    ) -> Result<Self> {
        distortion.validate()?;
        if rho0.dim() != system.dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                found: rho0.dim(),
            });
        }
        if channel.scheme().target().dim() != system.dim() {
            return Err(Error::DimensionMismatch {
                expected: system.dim(),
                found: channel.scheme().target().dim(),
            });
        }
        let n = system.n_qubits();
        let mut rotations = Vec::with_capacity(4 * n);
        for q in 0..n {
            for axis in [Axis::X, Axis::Y] {
                for sign in [Sign::Plus, Sign::Minus] {
                    rotations.push(local_rotation(axis, sign, q, n)?);
                }
            }
        }
        Ok(Self {
            rho0_ensemble: PureEnsemble::new(&rho0),
            model: HamiltonianModel::new(&system),
            system,
            rho0,
            distortion,
            channel,
            rotations,
            cache: None,
        })
    }

    pub fn system(&self) -> &SpinSystem {
        &self.system
    }

    pub fn channel(&self) -> &MeasurementChannel {
        &self.channel
    }

    pub fn distortion(&self) -> &DistortionConfig {
        &self.distortion
    }

    /// Number of propagation steps per control slice.
    fn steps_per_slice(&self) -> usize {
        if self.distortion.is_active() {
            self.distortion.sub_steps
        } else {
            1
        }
    }

    fn check_layout(&self, pulse: &ControlPulse) -> Result<()> {
        if pulse.layout() != self.system.layout() {
            return Err(Error::DimensionMismatch {
                expected: self.system.layout().len(),
                found: pulse.as_slice().len(),
            });
        }
        Ok(())
    }

    fn waveform(&self, pulse: &ControlPulse) -> Result<Vec<(crate::qsim::CMatrix, f64)>> {
        if self.distortion.is_active() {
            let wf = distort_pulse(&self.system, pulse, &self.distortion)?;
            waveform_hamiltonians_with(&self.model, &wf)
        } else {
            let dt = self.system.slice_duration();
            (0..self.system.slice_count())
                .map(|m| Ok((self.model.hamiltonian(&pulse.slice_channels(m))?, dt)))
                .collect()
        }
    }

    fn cached(&self, pulse: &ControlPulse) -> Option<&Propagation> {
        match &self.cache {
            Some((amps, prop)) if amps.as_slice() == pulse.as_slice() => Some(prop),
            _ => None,
        }
    }

    fn propagation(&mut self, pulse: &ControlPulse) -> Result<&Propagation> {
        self.check_layout(pulse)?;
        if self.cached(pulse).is_none() {
            let steps = self.waveform(pulse)?;
            let prop = Propagation::from_waveform(&steps, self.system.dim())?;
            self.cache = Some((pulse.as_slice().to_vec(), prop));
        }
        Ok(&self.cache.as_ref().expect("filled above").1)
    }

    /// Final state for `pulse` without touching the counter.
    pub fn final_state(&mut self, pulse: &ControlPulse) -> Result<DensityMatrix> {
        self.check_layout(pulse)?;
        if let Some(prop) = self.cached(pulse) {
            return Ok(prop.evolve(&self.rho0));
        }
        let steps = self.waveform(pulse)?;
        let rho = self.rho0_ensemble.evolve(&steps);
        if !rho
            .matrix()
            .as_slice()
            .iter()
            .all(|z: &Complex64| z.re.is_finite() && z.im.is_finite())
        {
            return Err(Error::InvalidState("non-finite amplitudes after evolution".into()));
        }
        Ok(rho)
    }

    fn rotation(&self, ins: &Insertion) -> Result<&UnitaryOperator> {
        let n = self.system.n_qubits();
        if ins.qubit >= n {
            return Err(Error::QubitOutOfRange {
                qubit: ins.qubit,
                n_qubits: n,
            });
        }
        let a = match ins.axis {
            Axis::X => 0,
            Axis::Y => 1,
            Axis::Z => return Err(Error::InvalidConfig("rotations are only inserted about x or y".into())),
        };
        let s = match ins.sign {
            Sign::Plus => 0,
            Sign::Minus => 1,
        };
        Ok(&self.rotations[4 * ins.qubit + 2 * a + s])
    }
}

impl FidelityOracle for SpinOracle {
    fn layout(&self) -> PulseLayout {
        self.system.layout()
    }

    fn slice_duration(&self) -> f64 {
        self.system.slice_duration()
    }

    fn evaluate(&mut self, pulse: &ControlPulse) -> Result<MeasuredFidelity> {
        let rho = self.final_state(pulse)?;
        self.channel.measure_fidelity(&rho)
    }

    fn evaluate_with_insertion(&mut self, pulse: &ControlPulse, insertion: Insertion) -> Result<MeasuredFidelity> {
        if insertion.after_slices > self.system.slice_count() {
            return Err(Error::SliceOutOfRange {
                index: insertion.after_slices,
                limit: self.system.slice_count(),
            });
        }
        let rotation = self.rotation(&insertion)?.clone();
        let after = insertion.after_slices * self.steps_per_slice();
        let rho0 = self.rho0.clone();
        let rho = self
            .propagation(pulse)?
            .evolve_with_insertion(&rho0, after, &rotation)?;
        self.channel.measure_fidelity(&rho)
    }

    fn exact_fidelity(&mut self, pulse: &ControlPulse) -> Result<f64> {
        let rho = self.final_state(pulse)?;
        exact_fidelity(&rho, self.channel.scheme().target())
    }

    fn evaluations(&self) -> u64 {
        self.channel.evaluations()
    }
}
