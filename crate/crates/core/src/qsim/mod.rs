// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! Closed-system spin simulator.
//!
//! Builds the rotating-frame Hamiltonian of an `n`-qubit spin system driven
//! by transverse piecewise-constant fields and propagates density matrices
//! through it. Basis states are ordered `|q_0 q_1 … q_{n-1}⟩` with qubit 0 as
//! the most significant bit. Qubits and slices are indexed from zero.
//!
//! Control amplitudes are carried in Hz; the `2π` that turns them into
//! angular frequencies is applied when a Hamiltonian is assembled.

mod eigen;
mod matrix;

use std::cell::OnceCell;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use eigen::{hermitian_eigen, HermitianEigen};
pub use matrix::CMatrix;

use crate::error::{Error, Result};

/// Tolerance used when validating Hermiticity, trace and positivity.
pub const STATE_TOL: f64 = 1e-10;

/// Largest imaginary part tolerated in a physical expectation value.
pub const IMAG_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Scalar `J σ_z^i σ_z^j` coupling between two qubits, in Hz.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Coupling {
    pub i: usize,
    pub j: usize,
    pub hz: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpinSystem {
    n_qubits: usize,
    couplings: Vec<Coupling>,
    total_time: f64,
    slice_count: usize,
}

/// Static description of the controlled spin register.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpinSystem", into = "RawSpinSystem")]
pub struct SpinSystem {
    n_qubits: usize,
    couplings: Vec<Coupling>,
    total_time: f64,
    slice_count: usize,
}

impl TryFrom<RawSpinSystem> for SpinSystem {
    type Error = Error;

    fn try_from(raw: RawSpinSystem) -> Result<Self> {
        SpinSystem::new(raw.n_qubits, raw.couplings, raw.total_time, raw.slice_count)
    }
}

impl From<SpinSystem> for RawSpinSystem {
    fn from(s: SpinSystem) -> Self {
        RawSpinSystem {
            n_qubits: s.n_qubits,
            couplings: s.couplings,
            total_time: s.total_time,
            slice_count: s.slice_count,
        }
    }
}

impl SpinSystem {
    pub fn new(n_qubits: usize, couplings: Vec<Coupling>, total_time: f64, slice_count: usize) -> Result<Self> {
        if n_qubits == 0 || n_qubits > 10 {
            return Err(Error::InvalidSystem(format!("qubit count {n_qubits} outside 1..=10")));
        }
        if slice_count == 0 {
            return Err(Error::InvalidSystem("slice count must be positive".into()));
        }
        if !(total_time.is_finite() && total_time > 0.0) {
            return Err(Error::InvalidSystem(format!(
                "total time {total_time} must be positive"
            )));
        }
        for c in &couplings {
            if c.i >= c.j || c.j >= n_qubits || !c.hz.is_finite() {
                return Err(Error::InvalidSystem(format!(
                    "coupling ({}, {}, {} Hz) needs i < j < {n_qubits} and a finite strength",
                    c.i, c.j, c.hz
                )));
            }
        }
        Ok(Self {
            n_qubits,
            couplings,
            total_time,
            slice_count,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn couplings(&self) -> &[Coupling] {
        &self.couplings
    }

    pub fn total_time(&self) -> f64 {
        self.total_time
    }

    pub fn slice_count(&self) -> usize {
        self.slice_count
    }

    /// Slice duration `T / M`.
    pub fn slice_duration(&self) -> f64 {
        self.total_time / self.slice_count as f64
    }

    /// Hilbert-space dimension `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.n_qubits
    }

    pub fn layout(&self) -> PulseLayout {
        PulseLayout {
            n_qubits: self.n_qubits,
            slices: self.slice_count,
        }
    }
}

/// Index map of a control vector: per qubit an x-block then a y-block, each
/// holding one amplitude per slice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PulseLayout {
    pub n_qubits: usize,
    pub slices: usize,
}

impl PulseLayout {
    /// Number of parameters `p = 2 n M`.
    pub fn len(&self) -> usize {
        2 * self.n_qubits * self.slices
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Position of `u_axis^qubit[slice]`. Only `X` and `Y` are control axes.
    pub fn index(&self, qubit: usize, axis: Axis, slice: usize) -> usize {
        let block = match axis {
            Axis::X => 2 * qubit,
            Axis::Y => 2 * qubit + 1,
            Axis::Z => panic!("z is not a control axis"),
        };
        block * self.slices + slice
    }

    /// Inverse of [`PulseLayout::index`].
    pub fn locate(&self, k: usize) -> (usize, Axis, usize) {
        let block = k / self.slices;
        let axis = if block.is_multiple_of(2) { Axis::X } else { Axis::Y };
        (block / 2, axis, k % self.slices)
    }
}

/// The optimization variable: `2 n M` amplitudes in Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlPulse {
    layout: PulseLayout,
    amplitudes: Vec<f64>,
}

impl ControlPulse {
    pub fn new(layout: PulseLayout, amplitudes: Vec<f64>) -> Result<Self> {
        if amplitudes.len() != layout.len() {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                found: amplitudes.len(),
            });
        }
        Ok(Self { layout, amplitudes })
    }

    pub fn zeros(layout: PulseLayout) -> Self {
        Self {
            layout,
            amplitudes: vec![0.0; layout.len()],
        }
    }

    pub fn layout(&self) -> PulseLayout {
        self.layout
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.amplitudes
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.amplitudes
    }

    pub fn amplitude(&self, qubit: usize, axis: Axis, slice: usize) -> f64 {
        self.amplitudes[self.layout.index(qubit, axis, slice)]
    }

    /// Channel values for one slice ordered `(x_0, y_0, x_1, y_1, …)`.
    pub fn slice_channels(&self, slice: usize) -> Vec<f64> {
        (0..self.layout.n_qubits)
            .flat_map(|q| [Axis::X, Axis::Y].map(|a| self.amplitude(q, a, slice)))
            .collect()
    }

    pub fn within_bounds(&self, lo: f64, hi: f64) -> bool {
        self.amplitudes.iter().all(|&u| (lo..=hi).contains(&u))
    }
}

/// A `2^n × 2^n` density matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix(CMatrix);

impl DensityMatrix {
    /// Validates Hermiticity, unit trace and positivity to [`STATE_TOL`].
    pub fn new(m: CMatrix) -> Result<Self> {
        let dev = m.hermitian_deviation();
        if dev > STATE_TOL {
            return Err(Error::InvalidState(format!("not Hermitian ({dev:.3e})")));
        }
        let tr = m.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > STATE_TOL {
            return Err(Error::InvalidState(format!("trace {tr} != 1")));
        }
        let min_eig = hermitian_eigen(&m).values.into_iter().fold(f64::INFINITY, f64::min);
        if min_eig < -STATE_TOL {
            return Err(Error::InvalidState(format!("negative eigenvalue {min_eig:.3e}")));
        }
        Ok(Self(m))
    }

    /// Projector onto a normalized pure state vector.
    pub fn pure(psi: &[Complex64]) -> Result<Self> {
        let norm: f64 = psi.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if !(norm > 0.0) {
            return Err(Error::InvalidState("zero state vector".into()));
        }
        let m = CMatrix::from_fn(psi.len(), |r, c| psi[r] * psi[c].conj() / (norm * norm));
        Self::new(m)
    }

    /// `|0…0⟩⟨0…0|` on `n` qubits.
    pub fn ground(n_qubits: usize) -> Self {
        let mut m = CMatrix::zeros(1 << n_qubits);
        m[(0, 0)] = Complex64::new(1.0, 0.0);
        Self(m)
    }

    /// `I / 2^n`.
    pub fn maximally_mixed(n_qubits: usize) -> Self {
        let d = 1 << n_qubits;
        Self(CMatrix::identity(d).scale_real(1.0 / d as f64))
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn purity(&self) -> f64 {
        self.0.trace_product(&self.0).re
    }
}

/// A `2^n × 2^n` unitary.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitaryOperator(CMatrix);

impl UnitaryOperator {
    pub fn identity(dim: usize) -> Self {
        Self(CMatrix::identity(dim))
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.0
    }

    pub fn dim(&self) -> usize {
        self.0.dim()
    }

    /// `self · other`
    pub fn then_after(&self, other: &UnitaryOperator) -> UnitaryOperator {
        UnitaryOperator(&self.0 * &other.0)
    }

    pub fn adjoint(&self) -> UnitaryOperator {
        UnitaryOperator(self.0.adjoint())
    }

    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(rho.0.conjugate_by(&self.0))
    }
}

fn single_qubit_pauli(axis: Axis) -> CMatrix {
    let o = Complex64::new(0.0, 0.0);
    let l = Complex64::new(1.0, 0.0);
    let i = Complex64::new(0.0, 1.0);
    match axis {
        Axis::X => CMatrix::from_rows(&[vec![o, l], vec![l, o]]),
        Axis::Y => CMatrix::from_rows(&[vec![o, -i], vec![i, o]]),
        Axis::Z => CMatrix::from_rows(&[vec![l, o], vec![o, -l]]),
    }
}

/// `I ⊗ … ⊗ σ_axis ⊗ … ⊗ I` with the Pauli matrix on `qubit`.
pub fn pauli_operator(axis: Axis, qubit: usize, n_qubits: usize) -> Result<CMatrix> {
    if qubit >= n_qubits {
        return Err(Error::QubitOutOfRange { qubit, n_qubits });
    }
    let sigma = single_qubit_pauli(axis);
    let id = CMatrix::identity(2);
    let mut out = CMatrix::identity(1);
    for q in 0..n_qubits {
        out = out.kron(if q == qubit { &sigma } else { &id });
    }
    Ok(out)
}

/// Tensor product of single-qubit Paulis given as a label such as `"XZ"`
/// (`I` allowed), leftmost letter acting on qubit 0.
pub fn pauli_string(label: &str) -> Result<CMatrix> {
    let mut out = CMatrix::identity(1);
    for ch in label.chars() {
        let factor = match ch.to_ascii_uppercase() {
            'I' => CMatrix::identity(2),
            'X' => single_qubit_pauli(Axis::X),
            'Y' => single_qubit_pauli(Axis::Y),
            'Z' => single_qubit_pauli(Axis::Z),
            other => {
                return Err(Error::InvalidConfig(format!(
                    "unknown Pauli letter {other:?} in {label:?}"
                )))
            }
        };
        out = out.kron(&factor);
    }
    Ok(out)
}

/// `Σ π J_ij σ_z^i σ_z^j / 2` in rad/s.
pub fn internal_hamiltonian(system: &SpinSystem) -> CMatrix {
    let n = system.n_qubits();
    let mut h = CMatrix::zeros(system.dim());
    for c in system.couplings() {
        let zz = &pauli_operator(Axis::Z, c.i, n).expect("validated coupling")
            * &pauli_operator(Axis::Z, c.j, n).expect("validated coupling");
        h.add_scaled(&zz, Complex64::new(PI * c.hz / 2.0, 0.0));
    }
    h
}

/// Drift plus the transverse control operators, prebuilt so that per-slice
/// Hamiltonians are a handful of scaled additions.
#[derive(Debug, Clone)]
pub struct HamiltonianModel {
    drift: CMatrix,
    controls: Vec<CMatrix>,
    /// `2π [H_S, σ_c]` per channel.
    drift_commutators: Vec<CMatrix>,
    /// `(2π)² [σ_x^q, σ_y^q]` per qubit.
    pair_commutators: Vec<CMatrix>,
}

impl HamiltonianModel {
    pub fn new(system: &SpinSystem) -> Self {
        let n = system.n_qubits();
        let controls: Vec<CMatrix> = (0..n)
            .flat_map(|q| [Axis::X, Axis::Y].map(|a| pauli_operator(a, q, n).expect("qubit in range")))
            .collect();
        let drift = internal_hamiltonian(system);
        let commutator = |a: &CMatrix, b: &CMatrix| &(a * b) - &(b * a);
        let drift_commutators = controls
            .iter()
            .map(|c| commutator(&drift, c).scale_real(2.0 * PI))
            .collect();
        let pair_commutators = controls
            .chunks(2)
            .map(|xy| commutator(&xy[0], &xy[1]).scale_real(4.0 * PI * PI))
            .collect();
        Self {
            drift,
            controls,
            drift_commutators,
            pair_commutators,
        }
    }

    pub fn drift(&self) -> &CMatrix {
        &self.drift
    }

    /// Number of control channels `2n`.
    pub fn channels(&self) -> usize {
        self.controls.len()
    }

    /// `H_S + Σ_j 2π (u_x^j σ_x^j + u_y^j σ_y^j)` for channel values ordered
    /// `(x_0, y_0, x_1, y_1, …)` in Hz.
    pub fn hamiltonian(&self, channels: &[f64]) -> Result<CMatrix> {
        if channels.len() != self.controls.len() {
            return Err(Error::DimensionMismatch {
                expected: self.controls.len(),
                found: channels.len(),
            });
        }
        let mut h = self.drift.clone();
        self.add_controls(&mut h, channels);
        Ok(h)
    }

    /// `h += s [H(channels), 2π Σ_c g_c σ_c]` using the prebuilt
    /// commutators.
    pub fn add_commutator_with_controls(
        &self,
        h: &mut CMatrix,
        channels: &[f64],
        gaps: &[f64],
        s: Complex64,
    ) -> Result<()> {
        for len in [channels.len(), gaps.len()] {
            if len != self.controls.len() {
                return Err(Error::DimensionMismatch {
                    expected: self.controls.len(),
                    found: len,
                });
            }
        }
        for (d, &g) in self.drift_commutators.iter().zip(gaps) {
            if g != 0.0 {
                h.add_scaled(d, s * g);
            }
        }
        // Controls on different qubits commute.
        for (q, k) in self.pair_commutators.iter().enumerate() {
            let w = channels[2 * q] * gaps[2 * q + 1] - channels[2 * q + 1] * gaps[2 * q];
            if w != 0.0 {
                h.add_scaled(k, s * w);
            }
        }
        Ok(())
    }

    fn add_controls(&self, h: &mut CMatrix, channels: &[f64]) {
        for (op, &u) in self.controls.iter().zip(channels) {
            if u != 0.0 {
                h.add_scaled(op, Complex64::new(2.0 * PI * u, 0.0));
            }
        }
    }
}

/// `H_m` for slice `m` of `pulse`.
pub fn slice_hamiltonian(system: &SpinSystem, pulse: &ControlPulse, m: usize) -> Result<CMatrix> {
    if pulse.layout() != system.layout() {
        return Err(Error::DimensionMismatch {
            expected: system.layout().len(),
            found: pulse.as_slice().len(),
        });
    }
    if m >= system.slice_count() {
        return Err(Error::SliceOutOfRange {
            index: m,
            limit: system.slice_count(),
        });
    }
    HamiltonianModel::new(system).hamiltonian(&pulse.slice_channels(m))
}

/// The plain piecewise-constant waveform: one `(H_m, Δt)` per slice.
pub fn pulse_hamiltonians(system: &SpinSystem, pulse: &ControlPulse) -> Result<Vec<(CMatrix, f64)>> {
    if pulse.layout() != system.layout() {
        return Err(Error::DimensionMismatch {
            expected: system.layout().len(),
            found: pulse.as_slice().len(),
        });
    }
    let model = HamiltonianModel::new(system);
    let dt = system.slice_duration();
    (0..system.slice_count())
        .map(|m| Ok((model.hamiltonian(&pulse.slice_channels(m))?, dt)))
        .collect()
}

/// `exp(−i dt H)` for Hermitian `H`.
pub fn matrix_exp_hermitian(h: &CMatrix, dt: f64) -> Result<UnitaryOperator> {
    let deviation = h.hermitian_deviation();
    if deviation > STATE_TOL {
        return Err(Error::NotHermitian { deviation });
    }
    Ok(exp_hermitian_unchecked(h, dt))
}

/// Scaling and squaring around a Taylor series: `A = −i dt H / 2^s` with
/// `‖A‖₁ ≤ 1/2`, summed until the terms drop below `f64` resolution.
fn exp_hermitian_unchecked(h: &CMatrix, dt: f64) -> UnitaryOperator {
    let n = h.dim();
    let norm = (0..n)
        .map(|c| (0..n).map(|r| h[(r, c)].norm()).sum::<f64>())
        .fold(0.0, f64::max)
        * dt.abs();
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as i32
    } else {
        0
    };
    let a = h.scale(Complex64::new(0.0, -dt / 2f64.powi(squarings)));
    let mut term = CMatrix::identity(n);
    let mut sum = term.clone();
    for k in 1..=40 {
        term = (&term * &a).scale_real(1.0 / k as f64);
        sum.add_scaled(&term, Complex64::new(1.0, 0.0));
        if term.as_slice().iter().all(|z| z.norm() < 1e-18) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    UnitaryOperator(sum)
}

/// One propagator per waveform step.
pub fn step_propagators(waveform: &[(CMatrix, f64)]) -> Result<Vec<UnitaryOperator>> {
    waveform.iter().map(|(h, dt)| matrix_exp_hermitian(h, *dt)).collect()
}

/// Cumulative products of a propagator chain, so that the state after any
/// prefix (or with an operator spliced in between two steps) costs a couple
/// of matrix products. Suffix products are built on first use.
#[derive(Debug, Clone)]
pub struct Propagation {
    steps: Vec<CMatrix>,
    /// `prefix[m] = U_m ⋯ U_1`, `prefix[0] = I`.
    prefix: Vec<CMatrix>,
    /// `suffix[m] = U_M ⋯ U_{m+1}`, `suffix[M] = I`.
    suffix: OnceCell<Vec<CMatrix>>,
}

impl Propagation {
    pub fn new(steps: &[UnitaryOperator], dim: usize) -> Self {
        let steps: Vec<CMatrix> = steps.iter().map(|u| u.0.clone()).collect();
        let mut prefix = Vec::with_capacity(steps.len() + 1);
        prefix.push(CMatrix::identity(dim));
        for u in &steps {
            let next = u * prefix.last().unwrap();
            prefix.push(next);
        }
        Self {
            steps,
            prefix,
            suffix: OnceCell::new(),
        }
    }

    fn suffix(&self) -> &[CMatrix] {
        self.suffix.get_or_init(|| {
            let m = self.steps.len();
            let mut suffix = vec![self.prefix[0].clone(); m + 1];
            for k in (0..m).rev() {
                suffix[k] = &suffix[k + 1] * &self.steps[k];
            }
            suffix
        })
    }

    pub fn from_waveform(waveform: &[(CMatrix, f64)], dim: usize) -> Result<Self> {
        Ok(Self::new(&step_propagators(waveform)?, dim))
    }

    pub fn steps(&self) -> usize {
        self.prefix.len() - 1
    }

    pub fn total(&self) -> UnitaryOperator {
        UnitaryOperator(self.prefix.last().unwrap().clone())
    }

    pub fn evolve(&self, rho0: &DensityMatrix) -> DensityMatrix {
        DensityMatrix(rho0.0.conjugate_by(self.prefix.last().unwrap()))
    }

    /// Evolves through `after` steps, applies `rotation`, then the rest.
    pub fn evolve_with_insertion(
        &self,
        rho0: &DensityMatrix,
        after: usize,
        rotation: &UnitaryOperator,
    ) -> Result<DensityMatrix> {
        if after > self.steps() {
            return Err(Error::SliceOutOfRange {
                index: after,
                limit: self.steps(),
            });
        }
        let u = &(&self.suffix()[after] * &rotation.0) * &self.prefix[after];
        Ok(DensityMatrix(rho0.0.conjugate_by(&u)))
    }
}

fn check_waveform(waveform: &[(CMatrix, f64)], rho0: &DensityMatrix) -> Result<()> {
    if waveform.is_empty() {
        return Err(Error::InvalidConfig("empty waveform".into()));
    }
    for (h, _) in waveform {
        if h.dim() != rho0.dim() {
            return Err(Error::DimensionMismatch {
                expected: rho0.dim(),
                found: h.dim(),
            });
        }
    }
    Ok(())
}

/// `ψ ← exp(−i dt H) ψ` by a Taylor series on the vector, split into
/// sub-steps with `‖H‖₁ dt ≤ 1/2`.
pub(crate) fn exp_apply(h: &CMatrix, dt: f64, psi: &mut [Complex64]) {
    let n = h.dim();
    let m = h.as_slice();
    // |re| + |im| bounds the modulus, so this over-estimates ‖H‖₁.
    let mut norm: f64 = 0.0;
    for c in 0..n {
        let mut col = 0.0;
        for r in 0..n {
            col += m[r * n + c].l1_norm();
        }
        norm = norm.max(col);
    }
    norm *= dt.abs();
    let pieces = if norm > 0.5 { (norm / 0.5).ceil() as usize } else { 1 };
    // −i dt H / pieces, folded into the matrix once.
    let a: Vec<Complex64> = m
        .iter()
        .map(|z| Complex64::new(z.im, -z.re) * (dt / pieces as f64))
        .collect();
    let mut term = vec![Complex64::new(0.0, 0.0); n];
    let mut next = term.clone();
    for _ in 0..pieces {
        term.copy_from_slice(psi);
        for k in 1..=40 {
            let inv = 1.0 / k as f64;
            let mut largest: f64 = 0.0;
            for r in 0..n {
                let row = &a[r * n..(r + 1) * n];
                let mut acc = Complex64::new(0.0, 0.0);
                for c in 0..n {
                    acc += row[c] * term[c];
                }
                acc *= inv;
                next[r] = acc;
                psi[r] += acc;
                largest = largest.max(acc.norm_sqr());
            }
            std::mem::swap(&mut term, &mut next);
            if largest < 1e-36 {
                break;
            }
        }
    }
}

/// A density matrix as a weighted set of orthonormal pure states, so that
/// evolution can act on vectors instead of operators.
#[derive(Debug, Clone)]
pub struct PureEnsemble {
    members: Vec<(f64, Vec<Complex64>)>,
}

impl PureEnsemble {
    pub fn new(rho: &DensityMatrix) -> Self {
        let HermitianEigen { values, vectors } = hermitian_eigen(&rho.0);
        let n = rho.dim();
        let members = values
            .iter()
            .enumerate()
            .filter(|(_, &w)| w > 1e-15)
            .map(|(k, &w)| (w, (0..n).map(|r| vectors[(r, k)]).collect()))
            .collect();
        Self { members }
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// Final state after `waveform`; the Hamiltonians are trusted to be
    /// Hermitian.
    pub fn evolve(&self, waveform: &[(CMatrix, f64)]) -> DensityMatrix {
        let n = waveform.first().map_or(0, |(h, _)| h.dim());
        let mut out = CMatrix::zeros(n);
        for (w, psi0) in &self.members {
            let mut psi = psi0.clone();
            for (h, dt) in waveform {
                exp_apply(h, *dt, &mut psi);
            }
            for r in 0..n {
                for c in 0..n {
                    out[(r, c)] += psi[r] * psi[c].conj() * *w;
                }
            }
        }
        DensityMatrix(out)
    }
}

/// `U ρ_0 U†` with `U = U_M ⋯ U_1` (later steps act on the left).
pub fn evolve(waveform: &[(CMatrix, f64)], rho0: &DensityMatrix) -> Result<DensityMatrix> {
    check_waveform(waveform, rho0)?;
    let mut rho = rho0.0.clone();
    for u in step_propagators(waveform)? {
        rho = rho.conjugate_by(&u.0);
    }
    Ok(DensityMatrix(rho))
}

/// Like [`evolve`] but with `rotation` applied after the first `after` steps.
pub fn evolve_with_insertion(
    waveform: &[(CMatrix, f64)],
    rho0: &DensityMatrix,
    after: usize,
    rotation: &UnitaryOperator,
) -> Result<DensityMatrix> {
    check_waveform(waveform, rho0)?;
    if rotation.dim() != rho0.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho0.dim(),
            found: rotation.dim(),
        });
    }
    Propagation::from_waveform(waveform, rho0.dim())?.evolve_with_insertion(rho0, after, rotation)
}

/// `exp(∓i (π/4) σ_axis^qubit)`: a `±π/2` rotation of one qubit.
pub fn local_rotation(axis: Axis, sign: Sign, qubit: usize, n_qubits: usize) -> Result<UnitaryOperator> {
    if axis == Axis::Z {
        return Err(Error::InvalidConfig("rotations are only inserted about x or y".into()));
    }
    let sigma = pauli_operator(axis, qubit, n_qubits)?;
    // Pauli operators square to one, so the exponential is exact in closed form.
    let mut u = CMatrix::identity(sigma.dim()).scale_real(FRAC_1_SQRT_2);
    u.add_scaled(&sigma, Complex64::new(0.0, -sign.value() * FRAC_1_SQRT_2));
    Ok(UnitaryOperator(u))
}

/// `Tr(ρ_f ρ_t)`, imaginary dust discarded and clipped to `[0, 1]`.
pub fn state_fidelity(rho_f: &DensityMatrix, rho_t: &DensityMatrix) -> Result<f64> {
    if rho_f.dim() != rho_t.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho_t.dim(),
            found: rho_f.dim(),
        });
    }
    let z = rho_f.0.trace_product(&rho_t.0);
    if z.im.abs() > IMAG_TOL {
        return Err(Error::ImaginaryResidue { residue: z.im });
    }
    Ok(z.re.clamp(0.0, 1.0))
}

/// `|ψ⟩⟨ψ|` with `|ψ⟩ = (|10⟩ + |01⟩)/√2`.
pub fn bell_target() -> DensityMatrix {
    let h = Complex64::new(0.5, 0.0);
    let mut m = CMatrix::zeros(4);
    for (r, c) in [(1, 1), (1, 2), (2, 1), (2, 2)] {
        m[(r, c)] = h;
    }
    DensityMatrix(m)
}
