// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! JSON experiment description. Every key is optional; missing keys take the
//! benchmark defaults for the chosen algorithm.

use serde::{Deserialize, Deserializer, Serialize};

use crate::bench::{bell_benchmark, Algorithm, Experiment};
use crate::distort::DistortionConfig;
use crate::error::{Error, Result};
use crate::optim::{DeConfig, GrapeConfig, NmplusConfig};
use crate::qsim::{bell_target, DensityMatrix, SpinSystem};

/// Distinguishes an absent key (`None`) from an explicit `null`
/// (`Some(None)`).
fn explicit_null<'de, D, T>(d: D) -> std::result::Result<Option<Option<T>>, D::Error>
where
    D: Deserializer<'de>,
    T: Deserialize<'de>,
{
    Option::<T>::deserialize(d).map(Some)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StoppingFile {
    /// `null` disables the threshold.
    #[serde(default, deserialize_with = "explicit_null", skip_serializing_if = "Option::is_none")]
    pub threshold_infidelity: Option<Option<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_evals: Option<u64>,
    /// `null` removes the iteration cap.
    #[serde(default, deserialize_with = "explicit_null", skip_serializing_if = "Option::is_none")]
    pub max_iterations: Option<Option<usize>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub algorithm: Option<Algorithm>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub system: Option<SpinSystem>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bounds: Option<(f64, f64)>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grape: Option<GrapeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nmplus: Option<NmplusConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub de: Option<DeConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distortion: Option<DistortionConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stopping: Option<StoppingFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub runs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidConfig(format!("config: {e}")))
    }

    /// Fully populated file describing `exp`.
    pub fn from_experiment(exp: &Experiment) -> Self {
        Self {
            algorithm: Some(exp.algorithm),
            system: Some(exp.system.clone()),
            bounds: Some(exp.bounds),
            grape: Some(exp.grape),
            nmplus: Some(exp.nmplus),
            de: Some(exp.de),
            distortion: Some(exp.distortion),
            noise_sigma: Some(exp.noise_sigma),
            stopping: Some(StoppingFile {
                threshold_infidelity: Some(exp.stopping.threshold_infidelity),
                max_evals: Some(exp.stopping.max_evals),
                max_iterations: Some(exp.stopping.max_iterations),
            }),
            runs: Some(exp.runs),
            seed: Some(exp.master_seed),
        }
    }

    /// Benchmark defaults for the algorithm, overridden by every key present.
    pub fn to_experiment(&self) -> Result<Experiment> {
        let mut exp = bell_benchmark(self.algorithm.unwrap_or(Algorithm::Nmplus));
        if let Some(system) = &self.system {
            if system.n_qubits() != 2 {
                return Err(Error::InvalidConfig(format!(
                    "system: the Bell target needs 2 qubits, got {}",
                    system.n_qubits()
                )));
            }
            exp.system = system.clone();
            exp.initial_state = DensityMatrix::ground(2);
            exp.target = bell_target();
        }
        if let Some(b) = self.bounds {
            exp.bounds = b;
        }
        if let Some(g) = self.grape {
            exp.grape = g;
        }
        if let Some(n) = self.nmplus {
            exp.nmplus = n;
        }
        if let Some(d) = self.de {
            exp.de = d;
        }
        if let Some(d) = self.distortion {
            exp.distortion = d;
        }
        if let Some(g) = self.noise_sigma {
            exp.noise_sigma = g;
        }
        if let Some(s) = &self.stopping {
            if let Some(t) = s.threshold_infidelity {
                exp.stopping.threshold_infidelity = t;
            }
            if let Some(m) = s.max_evals {
                exp.stopping.max_evals = m;
            }
            if let Some(m) = s.max_iterations {
                exp.stopping.max_iterations = m;
            }
        }
        if let Some(r) = self.runs {
            exp.runs = r;
        }
        if let Some(s) = self.seed {
            exp.master_seed = s;
        }
        exp.validate()?;
        Ok(exp)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_benchmark() {
        let exp = ConfigFile::parse("{}").unwrap().to_experiment().unwrap();
        let reference = bell_benchmark(Algorithm::Nmplus);
        assert_eq!(
            ConfigFile::from_experiment(&exp),
            ConfigFile::from_experiment(&reference)
        );
    }

    #[test]
    fn full_file_round_trips() {
        for alg in Algorithm::ALL {
            let exp = bell_benchmark(alg);
            let text = serde_json::to_string_pretty(&ConfigFile::from_experiment(&exp)).unwrap();
            let back = ConfigFile::parse(&text).unwrap().to_experiment().unwrap();
            assert_eq!(ConfigFile::from_experiment(&back), ConfigFile::from_experiment(&exp));
            assert_eq!(back.nmplus_config(), exp.nmplus_config());
            assert_eq!(back.de_config(), exp.de_config());
        }
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ConfigFile::parse(r#"{"algorithm": "de", "colour": 1}"#).is_err());
        assert!(ConfigFile::parse(r#"{"de": {"population": 10, "mutation": 1}}"#).is_err());
        assert!(ConfigFile::parse(r#"{"stopping": {"budget": 1}}"#).is_err());
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let cfg = ConfigFile::parse(r#"{"algorithm": "de", "de": {"population": 12}}"#).unwrap();
        let exp = cfg.to_experiment().unwrap();
        assert_eq!(exp.de.population, 12);
        assert_eq!(exp.de.crossover, 0.95);
        assert_eq!(exp.stopping.max_iterations, Some(75));
    }

    #[test]
    fn null_removes_iteration_cap() {
        let exp = ConfigFile::parse(r#"{"stopping": {"max_iterations": null}}"#)
            .unwrap()
            .to_experiment()
            .unwrap();
        assert_eq!(exp.stopping.max_iterations, None);
        assert_eq!(exp.stopping.threshold_infidelity, Some(1e-3));
    }

    #[test]
    fn invalid_values_rejected() {
        for text in [
            r#"{"de": {"population": 4}}"#,
            r#"{"system": {"n_qubits": 3, "couplings": [], "total_time": 0.005, "slice_count": 10}}"#,
            r#"{"system": {"n_qubits": 2, "couplings": [], "total_time": -1, "slice_count": 10}}"#,
            r#"{"bounds": [5, -5]}"#,
            r#"{"runs": 0}"#,
        ] {
            let parsed = ConfigFile::parse(text).and_then(|c| c.to_experiment());
            assert!(parsed.is_err(), "{text}");
        }
    }
}
