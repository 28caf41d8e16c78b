// Copyright 2026 The qloop Authors
// SPDX-License-Identifier: Apache-2.0

//! File formats written by the command-line front end.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::bench::BatchSummary;
use crate::error::Result;
use crate::optim::RunTrace;
use crate::qsim::{Axis, ControlPulse};

/// `x` rounded to 12 significant digits.
pub fn round12(x: f64) -> f64 {
    if x.is_finite() && x != 0.0 {
        format!("{x:.11e}").parse().expect("formatted float parses")
    } else {
        x
    }
}

/// Shortest text for `round12(x)`; non-finite values print as `nan`/`inf`.
pub fn fmt_num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else {
        format!("{}", round12(x))
    }
}

pub const TRACE_HEADER: &str = "iteration,cum_evals,measured_fidelity,exact_fidelity";

pub fn trace_csv(trace: &RunTrace) -> String {
    let mut out = String::from(TRACE_HEADER);
    out.push('\n');
    for s in &trace.samples {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            s.iteration,
            s.cumulative_evals,
            fmt_num(s.best_measured_fidelity),
            fmt_num(s.best_exact_fidelity)
        );
    }
    out
}

/// One row per slice, one column per channel (`ux1, uy1, ux2, …`).
pub fn pulse_csv(pulse: &ControlPulse) -> String {
    let layout = pulse.layout();
    let mut out = String::from("slice");
    for q in 1..=layout.n_qubits {
        let _ = write!(out, ",ux{q},uy{q}");
    }
    out.push('\n');
    for m in 0..layout.slices {
        let _ = write!(out, "{}", m + 1);
        for q in 0..layout.n_qubits {
            for axis in [Axis::X, Axis::Y] {
                let _ = write!(out, ",{}", fmt_num(pulse.amplitude(q, axis, m)));
            }
        }
        out.push('\n');
    }
    out
}

fn opt(x: Option<f64>) -> Option<f64> {
    x.filter(|v| v.is_finite()).map(round12)
}

#[derive(Serialize)]
struct CurveOut {
    evals: Vec<u64>,
    infidelity: Vec<Option<f64>>,
}

#[derive(Serialize)]
struct SummaryOut {
    runs: usize,
    success_rate: f64,
    exact_success_rate: f64,
    mean_evals: Option<f64>,
    var_evals: Option<f64>,
    eval65: Option<f64>,
    eval85: Option<f64>,
    eval99: Option<f64>,
    mean_final_exact_fidelity: Option<f64>,
    curve: CurveOut,
}

pub fn summary_json(summary: &BatchSummary) -> String {
    let out = SummaryOut {
        runs: summary.runs,
        success_rate: round12(summary.success_rate),
        exact_success_rate: round12(summary.exact_success_rate),
        mean_evals: opt(summary.mean_evals),
        var_evals: opt(summary.var_evals),
        eval65: opt(summary.crossings[0]),
        eval85: opt(summary.crossings[1]),
        eval99: opt(summary.crossings[2]),
        mean_final_exact_fidelity: opt(Some(summary.mean_final_exact_fidelity)),
        curve: CurveOut {
            evals: summary.curve.evals.clone(),
            infidelity: summary.curve.infidelity.iter().map(|&v| opt(Some(v))).collect(),
        },
    };
    let mut text = serde_json::to_string_pretty(&out).expect("plain data serializes");
    text.push('\n');
    text
}

pub const SWEEP_HEADER: &str = "value,success_rate,mean_evals,var_evals";

pub fn sweep_csv(points: &[(f64, BatchSummary)]) -> String {
    let mut out = String::from(SWEEP_HEADER);
    out.push('\n');
    let cell = |x: Option<f64>| x.map(fmt_num).unwrap_or_default();
    for (v, s) in points {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            fmt_num(*v),
            fmt_num(s.success_rate),
            cell(s.mean_evals),
            cell(s.var_evals)
        );
    }
    out
}

/// Writes through a temporary sibling and renames it into place, so a
/// reader never sees a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("out");
    let tmp = dir.join(format!(".{name}.{}.tmp", std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(contents.as_bytes())?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qsim::PulseLayout;

    #[test]
    fn twelve_significant_digits() {
        assert_eq!(round12(0.1 + 0.2), 0.3);
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(123456.7890123456), "123456.789012");
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(f64::NAN), "nan");
    }

    #[test]
    fn pulse_layout_columns() {
        let layout = PulseLayout { n_qubits: 2, slices: 2 };
        let p = ControlPulse::new(layout, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]).unwrap();
        assert_eq!(pulse_csv(&p), "slice,ux1,uy1,ux2,uy2\n1,1,3,5,7\n2,2,4,6,8\n");
    }

    #[test]
    fn atomic_write_replaces() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("nested/a.csv");
        write_atomic(&path, "one").unwrap();
        write_atomic(&path, "two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(path.parent().unwrap()).unwrap().count(), 1);
    }
}
