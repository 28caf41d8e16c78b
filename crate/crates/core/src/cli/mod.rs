// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! `qloop run | batch | sweep`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};

use rayon::prelude::*;

use crate::bench::{run_at, run_single, Algorithm, BatchSummary, Experiment, SweepParameter};
use crate::error::{Error, Result};
use crate::optim::RunTrace;

pub use config::ConfigFile;
use output::{pulse_csv, summary_json, sweep_csv, trace_csv, write_atomic};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "QLOOP_OUT_DIR";

#[derive(Debug, Parser)]
#[command(name = "qloop", version, about = "Closed-loop quantum control benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// One seeded run: writes trace.csv and pulse.csv.
    Run(Common),
    /// A batch of seeded runs: writes runs/run_NNNN.csv and summary.json.
    Batch {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
    },
    /// One batch per grid value: writes point_NNN/ directories and sweep.csv.
    Sweep {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long, value_enum)]
        param: Param,
        /// `start:step:end`
        #[arg(long)]
        grid: String,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Param {
    /// Filter rise time over slice duration.
    Tr,
    /// Standard deviation of the measurement noise.
    Gamma,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AlgorithmArg {
    Grape,
    Nmplus,
    De,
}

impl From<AlgorithmArg> for Algorithm {
    fn from(a: AlgorithmArg) -> Self {
        match a {
            AlgorithmArg::Grape => Algorithm::Grape,
            AlgorithmArg::Nmplus => Algorithm::Nmplus,
            AlgorithmArg::De => Algorithm::De,
        }
    }
}

#[derive(Debug, Args)]
pub struct Common {
    /// JSON experiment file; missing keys take benchmark defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub algorithm: Option<AlgorithmArg>,
    /// Output directory.
    #[arg(long, env = OUT_DIR_ENV, default_value = "qloop-out")]
    pub out: PathBuf,
    /// Worker threads for batches and sweeps.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Propagation sub-steps per slice when the filter is active.
    #[arg(long)]
    pub sub_steps: Option<usize>,
}

impl Common {
    /// Config file (if any) with command-line flags applied on top.
    fn experiment(&self, runs: Option<usize>) -> Result<Experiment> {
        let mut file = match &self.config {
            Some(path) => {
                let text =
                    fs::read_to_string(path).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?;
                ConfigFile::parse(&text).map_err(|e| Error::InvalidConfig(format!("{}: {e}", path.display())))?
            }
            None => ConfigFile::default(),
        };
        // Defaults, including the iteration cap, follow the final algorithm.
        if let Some(a) = self.algorithm {
            file.algorithm = Some(a.into());
        }
        if let Some(s) = self.seed {
            file.seed = Some(s);
        }
        if let Some(r) = runs {
            file.runs = Some(r);
        }
        let mut exp = file.to_experiment()?;
        if let Some(s) = self.sub_steps {
            exp.distortion.sub_steps = s;
        }
        exp.validate()?;
        Ok(exp)
    }

    fn configure_threads(&self) -> Result<()> {
        if let Some(n) = self.threads {
            if n == 0 {
                return Err(Error::InvalidConfig("--threads must be at least 1".into()));
            }
            // A pool may already exist when called twice in one process.
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
        Ok(())
    }
}

/// Parses `start:step:end` into the inclusive grid it describes.
pub fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let bad = |reason: &str| Error::InvalidGrid {
        spec: spec.to_string(),
        reason: reason.to_string(),
    };
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(bad("expected start:step:end"));
    }
    let nums: Vec<f64> = parts
        .iter()
        .map(|p| p.trim().parse::<f64>().map_err(|_| bad("not a number")))
        .collect::<Result<_>>()?;
    let (start, step, end) = (nums[0], nums[1], nums[2]);
    if !nums.iter().all(|v| v.is_finite()) {
        return Err(bad("values must be finite"));
    }
    if start < 0.0 || end < 0.0 {
        return Err(bad("values must be nonnegative"));
    }
    if end < start {
        return Err(bad("end is below start"));
    }
    if end == start {
        return Ok(vec![start]);
    }
    if !(step > 0.0) {
        return Err(bad("step must be positive"));
    }
    let count = ((end - start) / step + 1e-9).floor() as usize + 1;
    if count > 100_000 {
        return Err(bad("too many points"));
    }
    Ok((0..count).map(|k| output::round12(start + k as f64 * step)).collect())
}

fn summary_line(trace: &RunTrace) -> String {
    format!(
        "final_measured_fidelity={} final_exact_fidelity={} total_evals={} stop_reason={}",
        output::fmt_num(trace.final_measured_fidelity),
        output::fmt_num(trace.final_exact_fidelity),
        trace.total_evals,
        trace.stop_reason
    )
}

fn batch_line(summary: &BatchSummary) -> String {
    let cell = |x: Option<f64>| x.map(output::fmt_num).unwrap_or_else(|| "none".into());
    format!(
        "runs={} success_rate={} mean_evals={} var_evals={}",
        summary.runs,
        output::fmt_num(summary.success_rate),
        cell(summary.mean_evals),
        cell(summary.var_evals)
    )
}

/// Runs every index of one batch point, writing each trace as soon as its
/// run finishes.
fn batch_to_dir(exp: &Experiment, point: u64, dir: &Path) -> Result<Vec<RunTrace>> {
    (0..exp.runs as u64)
        .into_par_iter()
        .map(|run| {
            let trace = run_at(exp, point, run)?;
            let path = dir.join("runs").join(format!("run_{:04}.csv", run + 1));
            write_atomic(&path, &trace_csv(&trace))?;
            Ok(trace)
        })
        .collect()
}

/// Executes a parsed command. Reaching or missing the threshold is data,
/// not an error.
pub fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run(common) => {
            common.configure_threads()?;
            let exp = common.experiment(None)?;
            let trace = run_single(&exp, 0)?;
            write_atomic(&common.out.join("trace.csv"), &trace_csv(&trace))?;
            write_atomic(&common.out.join("pulse.csv"), &pulse_csv(&trace.terminal_pulse))?;
            println!("{}", summary_line(&trace));
        }
        Command::Batch { common, runs } => {
            common.configure_threads()?;
            let exp = common.experiment(runs)?;
            let traces = batch_to_dir(&exp, 0, &common.out)?;
            let summary = BatchSummary::from_traces(&traces, exp.stopping.threshold_infidelity);
            write_atomic(&common.out.join("summary.json"), &summary_json(&summary))?;
            println!("{}", batch_line(&summary));
        }
        Command::Sweep {
            common,
            runs,
            param,
            grid,
        } => {
            common.configure_threads()?;
            let values = parse_grid(&grid)?;
            let exp = common.experiment(runs)?;
            let parameter = match param {
                Param::Tr => SweepParameter::TrOverDt,
                Param::Gamma => SweepParameter::NoiseSigma,
            };
            let points: Vec<Experiment> = values
                .iter()
                .map(|&v| parameter.apply(&exp, v))
                .collect::<Result<_>>()?;
            let threshold = exp.stopping.threshold_infidelity;
            let mut rows = Vec::with_capacity(values.len());
            for (k, (point, &v)) in points.iter().zip(&values).enumerate() {
                let dir = common.out.join(format!("point_{k:03}"));
                let traces = batch_to_dir(point, k as u64, &dir)?;
                let summary = BatchSummary::from_traces(&traces, threshold);
                write_atomic(&dir.join("summary.json"), &summary_json(&summary))?;
                println!("value={} {}", output::fmt_num(v), batch_line(&summary));
                rows.push((v, summary));
            }
            write_atomic(&common.out.join("sweep.csv"), &sweep_csv(&rows))?;
        }
    }
    Ok(())
}

/// Entry point shared by the binary; returns the process exit code.
///
/// 0 on completion, 2 for usage or configuration errors, 1 for I/O errors.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match execute(cli) {
        Ok(()) => 0,
        Err(e @ (Error::Io(_) | Error::Json(_))) => {
            eprintln!("error: {e}");
            1
        }
        Err(e) => {
            eprintln!("error: {e}");
            2
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_parsing() {
        assert_eq!(parse_grid("0:0.1:1").unwrap().len(), 11);
        let g = parse_grid("0:0.0001:0.001").unwrap();
        assert_eq!(g.len(), 11);
        assert_eq!(g[3], 0.0003);
        assert_eq!(parse_grid("0:1:0").unwrap(), vec![0.0]);
        assert_eq!(parse_grid("0:0.1:1").unwrap()[3], 0.3);
    }

    #[test]
    fn bad_grids() {
        for spec in ["0:0.1", "a:1:2", "-1:1:2", "2:1:1", "0:0:1", "0:-1:1", "0:1e-9:1"] {
            assert!(matches!(parse_grid(spec), Err(Error::InvalidGrid { .. })), "{spec}");
        }
    }

    #[test]
    fn flags_override_defaults() {
        let cli = Cli::try_parse_from([
            "qloop",
            "batch",
            "--algorithm",
            "de",
            "--seed",
            "9",
            "--runs",
            "3",
            "--out",
            "x",
        ])
        .unwrap();
        let Command::Batch { common, runs } = cli.command else {
            panic!()
        };
        let exp = common.experiment(runs).unwrap();
        assert_eq!(exp.algorithm, Algorithm::De);
        assert_eq!((exp.master_seed, exp.runs), (9, 3));
        assert_eq!(exp.stopping.max_iterations, Some(75));
    }
}
