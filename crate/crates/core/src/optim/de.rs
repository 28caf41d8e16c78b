// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! Best-base differential evolution with two difference vectors and
//! binomial crossover.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::oracle::FidelityOracle;
use super::session::{stop_reason, Flow, RunTrace, Session, StoppingRule};
use crate::error::{Error, Result};
use crate::qsim::ControlPulse;

/// Smallest population for which four distinct partners besides the target
/// (and the best) always exist.
pub const MIN_POPULATION: usize = 6;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeConfig {
    /// Mutation scaling factor `R`.
    pub scale: f64,
    /// Crossover rate `Cr`.
    pub crossover: f64,
    pub population: usize,
    /// Amplitude bounds in Hz; supplied by the experiment, not the config file.
    #[serde(skip)]
    pub lo: f64,
    #[serde(skip)]
    pub hi: f64,
}

impl Default for DeConfig {
    fn default() -> Self {
        Self {
            scale: 0.6,
            crossover: 0.95,
            population: 10,
            lo: -50.0,
            hi: 50.0,
        }
    }
}

impl DeConfig {
    pub fn validate(&self) -> Result<()> {
        if self.population < MIN_POPULATION {
            return Err(Error::PopulationTooSmall(self.population));
        }
        if !(self.scale.is_finite() && self.scale >= 0.0) {
            return Err(Error::InvalidConfig(format!("de: scale {} must be ≥ 0", self.scale)));
        }
        if !(0.0..=1.0).contains(&self.crossover) {
            return Err(Error::InvalidConfig(format!(
                "de: crossover {} must lie in [0, 1]",
                self.crossover
            )));
        }
        if !(self.lo < self.hi) {
            return Err(Error::InvalidConfig("de: lo must be below hi".into()));
        }
        Ok(())
    }
}

/// Donor `u_best + R (u_r1 − u_r2 + u_r3 − u_r4)` for target `target`.
///
/// `r1..r4` are distinct from each other and from `target`; they may
/// coincide with `best`.
pub fn de_mutate<R: Rng>(
    population: &[Vec<f64>],
    best: usize,
    target: usize,
    scale: f64,
    bounds: Option<(f64, f64)>,
    rng: &mut R,
) -> Result<Vec<f64>> {
    let n = population.len();
    if n < MIN_POPULATION {
        return Err(Error::PopulationTooSmall(n));
    }
    let picks: Vec<usize> = sample(rng, n - 1, 4)
        .into_iter()
        .map(|k| if k >= target { k + 1 } else { k })
        .collect();
    Ok(mutate_with(
        population,
        best,
        [picks[0], picks[1], picks[2], picks[3]],
        scale,
        bounds,
    ))
}

fn mutate_with(
    population: &[Vec<f64>],
    best: usize,
    r: [usize; 4],
    scale: f64,
    bounds: Option<(f64, f64)>,
) -> Vec<f64> {
    let [a, b, c, d] = r.map(|i| &population[i]);
    population[best]
        .iter()
        .enumerate()
        .map(|(j, base)| {
            let v = base + scale * (a[j] - b[j] + c[j] - d[j]);
            match bounds {
                Some((lo, hi)) => v.clamp(lo, hi),
                None => v,
            }
        })
        .collect()
}

/// Binomial crossover: each component comes from the donor with probability
/// `cr`, and one uniformly chosen component always does.
pub fn de_crossover<R: Rng>(target: &[f64], donor: &[f64], cr: f64, rng: &mut R) -> Vec<f64> {
    debug_assert_eq!(target.len(), donor.len());
    let forced = rng.gen_range(0..target.len());
    target
        .iter()
        .zip(donor)
        .enumerate()
        .map(|(j, (&t, &v))| {
            let draw: f64 = rng.gen();
            if draw <= cr || j == forced {
                v
            } else {
                t
            }
        })
        .collect()
}

fn argmax(values: &[f64]) -> usize {
    (0..values.len())
        .max_by(|&a, &b| values[a].total_cmp(&values[b]).then(b.cmp(&a)))
        .unwrap_or(0)
}

/// Runs DE from a population drawn uniformly within the bounds.
///
/// Each generation re-measures every parent alongside its trial, so a
/// generation costs `2·Pn` fidelity measurements.
pub fn de_run<O: FidelityOracle, R: Rng>(
    oracle: &mut O,
    config: &DeConfig,
    stop: StoppingRule,
    rng: &mut R,
) -> Result<RunTrace> {
    config.validate()?;
    stop.validate()?;
    let layout = oracle.layout();
    let p = layout.len();
    let (lo, hi) = (config.lo, config.hi);
    let pulse = |v: &[f64]| ControlPulse::new(layout, v.to_vec()).expect("layout length");

    let mut population: Vec<Vec<f64>> = (0..config.population)
        .map(|_| (0..p).map(|_| rng.gen_range(lo..=hi)).collect())
        .collect();
    let mut fitness: Vec<f64> = Vec::with_capacity(config.population);

    let mut session = Session::new(oracle, stop);
    let flow = (|| -> Flow<std::convert::Infallible> {
        for u in &population {
            fitness.push(session.measure(&pulse(u))?);
        }
        let best = argmax(&fitness);
        session.finish_setup(fitness[best], &pulse(&population[best]));

        loop {
            for i in 0..config.population {
                let best = argmax(&fitness);
                let donor = de_mutate(&population, best, i, config.scale, Some((lo, hi)), rng)
                    .expect("population size validated");
                let trial = de_crossover(&population[i], &donor, config.crossover, rng);
                let parent = session.measure(&pulse(&population[i]))?;
                fitness[i] = parent;
                let candidate = session.measure(&pulse(&trial))?;
                if candidate >= parent {
                    population[i] = trial;
                    fitness[i] = candidate;
                }
            }
            let best = argmax(&fitness);
            session.complete_iteration(None, fitness[best], &pulse(&population[best]))?;
        }
    })();

    let reason = stop_reason(flow);
    let (best_pulse, best_measured) = if fitness.is_empty() {
        (pulse(&population[0]), f64::NAN)
    } else {
        let b = argmax(&fitness);
        (pulse(&population[b]), fitness[b])
    };
    Ok(session.finish(reason, best_pulse, best_measured))
}
