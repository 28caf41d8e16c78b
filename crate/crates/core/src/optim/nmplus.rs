// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! NMplus: Nelder-Mead with a regular initial simplex and a quasi-gradient
//! reflection direction fitted through all vertices.
//!
//! The simplex minimizes infidelity `1 − f̃(u)`.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::FidelityOracle;
use super::session::{stop_reason, Flow, RunTrace, Session, StoppingRule};
use crate::error::{Error, Result};
use crate::qsim::ControlPulse;

/// Condition number above which the hyperplane fit is abandoned.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NmplusConfig {
    /// Reflection scale.
    pub alpha: f64,
    /// Contraction factor.
    pub beta: f64,
    /// Expansion factor.
    pub gamma_exp: f64,
    /// Shrink factor.
    pub delta: f64,
    /// Coordinate unit (Hz) in which the quasi-gradient step is taken.
    pub step_unit: f64,
    /// Amplitude bounds in Hz; supplied by the experiment, not the config file.
    #[serde(skip)]
    pub lo: f64,
    #[serde(skip)]
    pub hi: f64,
}

impl Default for NmplusConfig {
    fn default() -> Self {
        Self {
            alpha: 3.0,
            beta: 1.0 / 3.0,
            gamma_exp: 2.0,
            delta: 1.0 / 3.0,
            step_unit: 50.0,
            lo: -50.0,
            hi: 50.0,
        }
    }
}

impl NmplusConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |what: &str| Err(Error::InvalidConfig(format!("nmplus: {what}")));
        if !(self.alpha > 0.0) {
            return bad("alpha must be > 0");
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return bad("beta must lie in (0, 1)");
        }
        if !(self.gamma_exp > 1.0) {
            return bad("gamma_exp must be > 1");
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return bad("delta must lie in (0, 1)");
        }
        if !(self.step_unit > 0.0 && self.step_unit.is_finite()) {
            return bad("step_unit must be positive");
        }
        if !(self.lo < self.hi) {
            return bad("lo must be below hi");
        }
        Ok(())
    }
}

/// Which case of the update an iteration took.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NmBranch {
    /// Reflected point replaced the worst vertex.
    Reflect,
    /// Reflection beat the best vertex; expansion was tried.
    Expand,
    OutsideContract,
    InsideContract,
    /// A contraction failed and every non-best vertex was pulled in.
    Shrink,
}

impl NmBranch {
    /// Fidelity measurements made by an iteration of this kind in a
    /// `p`-parameter simplex.
    pub fn measurements(self, p: usize) -> u64 {
        match self {
            NmBranch::Reflect => 1,
            NmBranch::Expand | NmBranch::OutsideContract | NmBranch::InsideContract => 2,
            NmBranch::Shrink => 2 + p as u64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            NmBranch::Reflect => "reflect",
            NmBranch::Expand => "expand",
            NmBranch::OutsideContract => "outside_contract",
            NmBranch::InsideContract => "inside_contract",
            NmBranch::Shrink => "shrink",
        }
    }
}

fn clip(v: &mut [f64], lo: f64, hi: f64) {
    for x in v {
        *x = x.clamp(lo, hi);
    }
}

/// Regular simplex around `base`: vertex `i ≥ 1` is
/// `base + (C_ij/√p)(√(p+1) − 1)` off its own axis and
/// `base + (C_ij/√p)(√(p+1) + p − 1)` on axis `j = i − 1`.
///
/// `scale(i, j)` supplies `C_ij`; vertices are clipped to `bounds`.
pub fn nm_regular_simplex(
    base: &[f64],
    mut scale: impl FnMut(usize, usize) -> f64,
    bounds: Option<(f64, f64)>,
) -> Vec<Vec<f64>> {
    let p = base.len();
    let pf = p as f64;
    let off = ((pf + 1.0).sqrt() - 1.0) / pf.sqrt();
    let on = ((pf + 1.0).sqrt() + pf - 1.0) / pf.sqrt();
    let mut vertices = Vec::with_capacity(p + 1);
    vertices.push(base.to_vec());
    for i in 1..=p {
        let mut v: Vec<f64> = (0..p)
            .map(|j| base[j] + scale(i, j) * if j + 1 == i { on } else { off })
            .collect();
        if let Some((lo, hi)) = bounds {
            clip(&mut v, lo, hi);
        }
        vertices.push(v);
    }
    if let Some((lo, hi)) = bounds {
        clip(&mut vertices[0], lo, hi);
    }
    vertices
}

/// Slopes `(a_1, …, a_p)` of the hyperplane `f = a_0 + Σ a_j u_j` through
/// all `p + 1` vertices, or `None` when the system is singular or worse
/// conditioned than [`MAX_CONDITION`].
pub fn nm_hyperplane_direction(vertices: &[Vec<f64>], values: &[f64]) -> Option<Vec<f64>> {
    let n = vertices.len();
    if n == 0 || values.len() != n || vertices.iter().any(|v| v.len() + 1 != n) {
        return None;
    }
    let x = DMatrix::from_fn(n, n, |r, c| if c == 0 { 1.0 } else { vertices[r][c - 1] });
    let inv = x.clone().lu().try_inverse()?;
    let norm1 = |m: &DMatrix<f64>| {
        m.column_iter()
            .map(|col| col.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    };
    let cond = norm1(&x) * norm1(&inv);
    if !cond.is_finite() || cond > MAX_CONDITION {
        return None;
    }
    let g = inv * DVector::from_column_slice(values);
    Some(g.iter().skip(1).copied().collect())
}

/// Classic reflection of the worst vertex through the centroid of the rest.
fn centroid_reflection(sorted: &[Vec<f64>]) -> Vec<f64> {
    let p = sorted.len() - 1;
    let dim = sorted[0].len();
    let mut c = vec![0.0; dim];
    for v in &sorted[..p] {
        for (ci, x) in c.iter_mut().zip(v) {
            *ci += x / p as f64;
        }
    }
    c.iter().zip(&sorted[p]).map(|(ci, w)| 2.0 * ci - w).collect()
}

fn first_coincident_pair(vertices: &[Vec<f64>]) -> Option<(usize, usize)> {
    for a in 0..vertices.len() {
        for b in (a + 1)..vertices.len() {
            let dist = vertices[a]
                .iter()
                .zip(&vertices[b])
                .map(|(x, y)| (x - y).powi(2))
                .sum::<f64>()
                .sqrt();
            if dist <= 1e-12 {
                return Some((a, b));
            }
        }
    }
    None
}

/// Runs NMplus from a random regular simplex anchored at the zero pulse.
pub fn nmplus_run<O: FidelityOracle, R: Rng>(
    oracle: &mut O,
    config: &NmplusConfig,
    stop: StoppingRule,
    rng: &mut R,
) -> Result<RunTrace> {
    config.validate()?;
    let p = oracle.layout().len();
    let (lo, hi) = (config.lo, config.hi);
    let base = vec![0.0; p];
    let vertices = nm_regular_simplex(&base, |_, _| rng.gen_range(lo..=hi), Some((lo, hi)));
    nmplus_run_from(oracle, config, stop, vertices)
}

/// Runs NMplus from explicit initial vertices.
pub fn nmplus_run_from<O: FidelityOracle>(
    oracle: &mut O,
    config: &NmplusConfig,
    stop: StoppingRule,
    vertices: Vec<Vec<f64>>,
) -> Result<RunTrace> {
    config.validate()?;
    stop.validate()?;
    let layout = oracle.layout();
    let p = layout.len();
    if vertices.len() != p + 1 || vertices.iter().any(|v| v.len() != p) {
        return Err(Error::DimensionMismatch {
            expected: p + 1,
            found: vertices.len(),
        });
    }
    if let Some((a, b)) = first_coincident_pair(&vertices) {
        return Err(Error::DegenerateSimplex(a, b));
    }

    let pulse = |v: &[f64]| ControlPulse::new(layout, v.to_vec()).expect("layout length");
    let (lo, hi) = (config.lo, config.hi);
    let step = config.alpha * config.step_unit * config.step_unit;

    let mut session = Session::new(oracle, stop);
    let mut simplex = vertices;
    let mut values: Vec<f64> = Vec::with_capacity(p + 1);

    let flow = (|| -> Flow<std::convert::Infallible> {
        // Infidelities of the initial vertices.
        for v in &simplex {
            let f = session.measure(&pulse(v))?;
            values.push(1.0 - f);
        }
        let best = (0..=p).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
        session.finish_setup(1.0 - values[best], &pulse(&simplex[best]));

        loop {
            let mut order: Vec<usize> = (0..=p).collect();
            order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
            simplex = order.iter().map(|&i| simplex[i].clone()).collect();
            values = order.iter().map(|&i| values[i]).collect();

            let f1 = values[0];
            let fp = values[p - 1];
            let fworst = values[p];
            let u1 = simplex[0].clone();

            let mut ur = match nm_hyperplane_direction(&simplex, &values) {
                Some(dir) => u1.iter().zip(&dir).map(|(u, d)| u - step * d).collect(),
                None => centroid_reflection(&simplex),
            };
            clip(&mut ur, lo, hi);
            let fr = 1.0 - session.measure(&pulse(&ur))?;

            let along = |factor: f64| -> Vec<f64> {
                let mut v: Vec<f64> = u1.iter().zip(&ur).map(|(a, r)| a + factor * (r - a)).collect();
                clip(&mut v, lo, hi);
                v
            };

            let branch = if fr < f1 {
                let ue = along(config.gamma_exp);
                let fe = 1.0 - session.measure(&pulse(&ue))?;
                if fe < fr {
                    simplex[p] = ue;
                    values[p] = fe;
                } else {
                    simplex[p] = ur;
                    values[p] = fr;
                }
                NmBranch::Expand
            } else if fr < fp {
                simplex[p] = ur;
                values[p] = fr;
                NmBranch::Reflect
            } else {
                let (uc, kind) = if fr < fworst {
                    (along(config.beta), NmBranch::OutsideContract)
                } else {
                    (along(-config.beta), NmBranch::InsideContract)
                };
                let fc = 1.0 - session.measure(&pulse(&uc))?;
                if fc <= fr {
                    simplex[p] = uc;
                    values[p] = fc;
                    kind
                } else {
                    for i in 1..=p {
                        let mut v: Vec<f64> = u1
                            .iter()
                            .zip(&simplex[i])
                            .map(|(a, x)| a + config.delta * (x - a))
                            .collect();
                        clip(&mut v, lo, hi);
                        values[i] = 1.0 - session.measure(&pulse(&v))?;
                        simplex[i] = v;
                    }
                    NmBranch::Shrink
                }
            };

            let best = (0..=p).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap();
            session.complete_iteration(Some(branch), 1.0 - values[best], &pulse(&simplex[best]))?;
        }
    })();

    let reason = stop_reason(flow);
    let (best_pulse, best_measured) = match (0..values.len()).min_by(|&a, &b| values[a].total_cmp(&values[b])) {
        Some(i) => (pulse(&simplex[i]), 1.0 - values[i]),
        None => (pulse(&simplex[0]), f64::NAN),
    };
    Ok(session.finish(reason, best_pulse, best_measured))
}
