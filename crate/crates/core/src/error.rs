// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("qubit index {qubit} out of range for a {n_qubits}-qubit system")]
    QubitOutOfRange { qubit: usize, n_qubits: usize },

    #[error("slice index {index} out of range (limit {limit})")]
    SliceOutOfRange { index: usize, limit: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("matrix is not Hermitian (max deviation {deviation:.3e})")]
    NotHermitian { deviation: f64 },

    #[error("expectation value has imaginary residue {residue:.3e}")]
    ImaginaryResidue { residue: f64 },

    #[error("invalid density matrix: {0}")]
    InvalidState(String),

    #[error("invalid spin system: {0}")]
    InvalidSystem(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate initial simplex: vertices {0} and {1} coincide")]
    DegenerateSimplex(usize, usize),

    #[error("population of {0} is too small; at least 6 individuals are required")]
    PopulationTooSmall(usize),

    #[error("invalid grid spec {spec:?}: {reason}")]
    InvalidGrid { spec: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
