// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! Closed-loop learners and the bookkeeping they share.

pub mod de;
pub mod grape;
pub mod nmplus;
pub mod oracle;
pub mod session;

pub use de::{de_crossover, de_mutate, de_run, DeConfig};
pub use grape::{grape_measure_gradient, grape_run, GrapeConfig};
pub use nmplus::{nm_hyperplane_direction, nm_regular_simplex, nmplus_run, nmplus_run_from, NmBranch, NmplusConfig};
pub use oracle::{FidelityOracle, Insertion, SpinOracle};
pub use session::{evals_to_threshold, IterationRecord, RunTrace, Sample, StopReason, StoppingRule};
