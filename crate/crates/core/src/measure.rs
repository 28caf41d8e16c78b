// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! The virtual spectrometer.
//!
//! A [`MeasurementChannel`] turns a final state into a measured fidelity by
//! partial tomography: the target is expanded in Pauli strings and only the
//! strings with non-zero weight are measured. Each such expectation value is
//! one function evaluation, which is the cost unit every optimizer is
//! audited against.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::qsim::{pauli_string, state_fidelity, CMatrix, DensityMatrix, IMAG_TOL};

/// One measured Pauli observable and its weight in the target expansion.
#[derive(Debug, Clone)]
pub struct BasisTerm {
    pub coefficient: f64,
    pub label: String,
    pub operator: CMatrix,
}

/// `F = scale · (offset + Σ_k c_k ⟨P_k⟩)`.
#[derive(Debug, Clone)]
pub struct TomographyScheme {
    target: DensityMatrix,
    offset: f64,
    scale: f64,
    terms: Vec<BasisTerm>,
}

impl TomographyScheme {
    /// XX, YY and ZZ measurements for `(|10⟩ + |01⟩)/√2`.
    pub fn bell() -> Self {
        let terms = [(1.0, "XX"), (1.0, "YY"), (-1.0, "ZZ")]
            .into_iter()
            .map(|(coefficient, label)| BasisTerm {
                coefficient,
                label: label.to_string(),
                operator: pauli_string(label).expect("static label"),
            })
            .collect();
        Self {
            target: crate::qsim::bell_target(),
            offset: 1.0,
            scale: 0.25,
            terms,
        }
    }

    /// Expands an arbitrary pure target in the Pauli basis, keeping the
    /// strings with weight above `1e-12`.
    pub fn from_target(target: &DensityMatrix) -> Result<Self> {
        let dim = target.dim();
        let n = dim.trailing_zeros() as usize;
        if dim != 1 << n {
            return Err(Error::InvalidState(format!("dimension {dim} is not a power of two")));
        }
        let mut terms = Vec::new();
        let mut offset = 0.0;
        for code in 0..(1usize << (2 * n)) {
            let label: String = (0..n)
                .map(|q| ['I', 'X', 'Y', 'Z'][(code >> (2 * (n - 1 - q))) & 3])
                .collect();
            let op = pauli_string(&label)?;
            let weight = target.matrix().trace_product(&op);
            if weight.im.abs() > IMAG_TOL {
                return Err(Error::ImaginaryResidue { residue: weight.im });
            }
            if label.chars().all(|c| c == 'I') {
                offset = weight.re;
            } else if weight.re.abs() > 1e-12 {
                terms.push(BasisTerm {
                    coefficient: weight.re,
                    label,
                    operator: op,
                });
            }
        }
        Ok(Self {
            target: target.clone(),
            offset,
            scale: 1.0 / dim as f64,
            terms,
        })
    }

    pub fn target(&self) -> &DensityMatrix {
        &self.target
    }

    pub fn terms(&self) -> &[BasisTerm] {
        &self.terms
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    /// Function evaluations charged per fidelity estimate.
    pub fn cost(&self) -> u64 {
        self.terms.len() as u64
    }

    /// Noiseless fidelity assembled from the measured expectations.
    pub fn assemble(&self, rho: &DensityMatrix) -> Result<f64> {
        let mut acc = self.offset;
        for term in &self.terms {
            acc += term.coefficient * pauli_expectation(rho, &term.operator)?;
        }
        Ok(self.scale * acc)
    }
}

/// `Tr(ρ · op)` for a Hermitian observable.
pub fn pauli_expectation(rho: &DensityMatrix, op: &CMatrix) -> Result<f64> {
    if op.dim() != rho.dim() {
        return Err(Error::DimensionMismatch {
            expected: rho.dim(),
            found: op.dim(),
        });
    }
    let z = rho.matrix().trace_product(op);
    if z.im.abs() > IMAG_TOL {
        return Err(Error::ImaginaryResidue { residue: z.im });
    }
    Ok(z.re)
}

/// `Tr(ρ · target)` computed directly; never charged to any counter.
pub fn exact_fidelity(rho: &DensityMatrix, target: &DensityMatrix) -> Result<f64> {
    state_fidelity(rho, target)
}

/// A fidelity as the learning loop sees it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasuredFidelity {
    /// May leave `[0, 1]` slightly when noise is on.
    pub value: f64,
    pub evals_charged: u64,
}

/// Stateful measurement apparatus: tomography scheme, additive Gaussian
/// noise of standard deviation `noise_sigma` on the assembled fidelity, and
/// an evaluation counter.
///
/// Not meant to be shared between runs; each run owns one.
#[derive(Debug, Clone)]
pub struct MeasurementChannel {
    scheme: TomographyScheme,
    noise: Option<Normal<f64>>,
    noise_sigma: f64,
    rng: ChaCha8Rng,
    evals: u64,
}

impl MeasurementChannel {
    pub fn new(scheme: TomographyScheme, noise_sigma: f64, rng_seed: u64) -> Result<Self> {
        Self::with_rng(scheme, noise_sigma, ChaCha8Rng::seed_from_u64(rng_seed))
    }

    pub fn with_rng(scheme: TomographyScheme, noise_sigma: f64, rng: ChaCha8Rng) -> Result<Self> {
        if !(noise_sigma.is_finite() && noise_sigma >= 0.0) {
            return Err(Error::InvalidConfig(format!(
                "noise sigma {noise_sigma} must be finite and nonnegative"
            )));
        }
        let noise = (noise_sigma > 0.0).then(|| Normal::new(0.0, noise_sigma).expect("valid sigma"));
        Ok(Self {
            scheme,
            noise,
            noise_sigma,
            rng,
            evals: 0,
        })
    }

    pub fn scheme(&self) -> &TomographyScheme {
        &self.scheme
    }

    pub fn noise_sigma(&self) -> f64 {
        self.noise_sigma
    }

    pub fn evaluations(&self) -> u64 {
        self.evals
    }

    /// Measures every basis term of the scheme and adds one noise sample to
    /// the assembled fidelity. The state itself is left untouched.
    pub fn measure_fidelity(&mut self, rho: &DensityMatrix) -> Result<MeasuredFidelity> {
        let exact = self.scheme.assemble(rho)?;
        let cost = self.scheme.cost();
        self.charge_evaluations(cost);
        let eps = match &self.noise {
            Some(dist) => dist.sample(&mut self.rng),
            None => 0.0,
        };
        Ok(MeasuredFidelity {
            value: exact + eps,
            evals_charged: cost,
        })
    }

    /// Adds `k` to the evaluation counter and returns the new total.
    pub fn charge_evaluations(&mut self, k: u64) -> u64 {
        self.evals += k;
        self.evals
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::{bell_target, pauli_string};

    fn bell_channel(sigma: f64, seed: u64) -> MeasurementChannel {
        MeasurementChannel::new(TomographyScheme::bell(), sigma, seed).unwrap()
    }

    #[test]
    fn expectation_cases() {
        let zz = pauli_string("ZZ").unwrap();
        let xx = pauli_string("XX").unwrap();
        assert_eq!(pauli_expectation(&DensityMatrix::ground(2), &zz).unwrap(), 1.0);
        assert!((pauli_expectation(&bell_target(), &xx).unwrap() - 1.0).abs() < 1e-15);
        let mixed = DensityMatrix::maximally_mixed(2);
        for label in ["XI", "IY", "XZ", "YY", "ZZ"] {
            let op = pauli_string(label).unwrap();
            assert!(pauli_expectation(&mixed, &op).unwrap().abs() < 1e-15);
        }
        assert!(pauli_expectation(&mixed, &pauli_string("X").unwrap()).is_err());
    }

    #[test]
    fn noiseless_measurement() {
        let mut ch = bell_channel(0.0, 1);
        let m = ch.measure_fidelity(&bell_target()).unwrap();
        assert!((m.value - 1.0).abs() < 1e-15);
        assert_eq!(m.evals_charged, 3);
        assert_eq!(ch.evaluations(), 3);
        let m = ch.measure_fidelity(&DensityMatrix::ground(2)).unwrap();
        assert_eq!(m.value, 0.0);
        assert_eq!(ch.evaluations(), 6);
    }

    #[test]
    fn charge_counts_exactly() {
        let mut ch = bell_channel(0.0, 1);
        assert_eq!(ch.charge_evaluations(3), 3);
        assert_eq!(ch.charge_evaluations(240), 243);
    }

    #[test]
    fn noise_statistics() {
        let sigma = 0.001;
        let mut ch = bell_channel(sigma, 42);
        let rho = DensityMatrix::maximally_mixed(2);
        let n = 100_000;
        let samples: Vec<f64> = (0..n).map(|_| ch.measure_fidelity(&rho).unwrap().value).collect();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - 0.25).abs() < 4.0 * sigma / (n as f64).sqrt());
        assert!((var.sqrt() - sigma).abs() < 0.05 * sigma);
        assert_eq!(ch.evaluations(), 3 * n as u64);
    }

    #[test]
    fn seeds_determine_noise() {
        let rho = DensityMatrix::maximally_mixed(2);
        let draw = |seed| {
            let mut ch = bell_channel(0.01, seed);
            (0..10_000)
                .map(|_| ch.measure_fidelity(&rho).unwrap().value - 0.25)
                .collect::<Vec<_>>()
        };
        let a = draw(7);
        assert_eq!(a, draw(7));
        let b = draw(8);
        let dot: f64 = a.iter().zip(&b).map(|(x, y)| x * y).sum();
        let na: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        let nb: f64 = b.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!((dot / (na * nb)).abs() < 0.05);
    }

    #[test]
    fn generic_decomposition_recovers_bell_scheme() {
        let scheme = TomographyScheme::from_target(&bell_target()).unwrap();
        let labels: Vec<_> = scheme
            .terms()
            .iter()
            .map(|t| (t.label.as_str(), t.coefficient))
            .collect();
        assert_eq!(labels.len(), 3);
        for (label, coef) in [("XX", 1.0), ("YY", 1.0), ("ZZ", -1.0)] {
            assert!(labels.iter().any(|&(l, c)| l == label && (c - coef).abs() < 1e-15));
        }
        assert!((scheme.offset() - 1.0).abs() < 1e-15);
        assert_eq!(scheme.scale(), 0.25);
    }

    #[test]
    fn negative_sigma_rejected() {
        assert!(MeasurementChannel::new(TomographyScheme::bell(), -1e-3, 0).is_err());
    }
}
