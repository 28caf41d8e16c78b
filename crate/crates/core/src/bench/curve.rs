// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

use serde::Serialize;

use crate::optim::{RunTrace, Sample};

/// Number of points on the shared evaluation grid.
pub const GRID_POINTS: usize = 201;

/// Mean infidelity against cumulative evaluations.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct Curve {
    pub evals: Vec<u64>,
    pub infidelity: Vec<f64>,
}

/// Exact infidelity of the last sample at or before `evals`, held constant
/// after the run ends.
pub fn infidelity_at(samples: &[Sample], evals: u64) -> Option<f64> {
    let k = samples.partition_point(|s| s.cumulative_evals <= evals);
    (k > 0).then(|| 1.0 - samples[k - 1].best_exact_fidelity)
}

/// Evenly spaced grid from the latest first sample to the latest last
/// sample over all runs.
fn grid(traces: &[RunTrace]) -> Vec<u64> {
    let firsts = traces.iter().filter_map(|t| t.samples.first());
    let lasts = traces.iter().filter_map(|t| t.samples.last());
    let (Some(start), Some(end)) = (
        firsts.map(|s| s.cumulative_evals).max(),
        lasts.map(|s| s.cumulative_evals).max(),
    ) else {
        return Vec::new();
    };
    if traces.iter().any(|t| t.samples.is_empty()) {
        return Vec::new();
    }
    let mut g: Vec<u64> = (0..GRID_POINTS)
        .map(|k| start + ((end - start) as f64 * k as f64 / (GRID_POINTS - 1) as f64).round() as u64)
        .collect();
    g.dedup();
    g
}

/// Pointwise mean of the step-interpolated per-run curves.
pub fn average_curve(traces: &[RunTrace]) -> Curve {
    let evals = grid(traces);
    let infidelity = evals
        .iter()
        .map(|&e| {
            let mut v: Vec<f64> = traces
                .iter()
                .map(|t| infidelity_at(&t.samples, e).expect("grid starts after every first sample"))
                .collect();
            v.sort_by(f64::total_cmp);
            v.iter().sum::<f64>() / v.len() as f64
        })
        .collect();
    Curve { evals, infidelity }
}
