//! Suite dispatch, coverage accounting and plot-data export.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use serde::Serialize;

use crate::checks::{self, anchor};
use crate::context::Lab;
use crate::report::{Curve, Record, Recorder, Report};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Norms,
    Aps,
    Contraction,
    Flow,
    Orbits,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Norms => "norms",
            Suite::Aps => "aps",
            Suite::Contraction => "contraction",
            Suite::Flow => "flow",
            Suite::Orbits => "orbits",
            Suite::All => "all",
        }
    }
}

/// Every public operation a full run must exercise.
pub const OPERATIONS: &[&str] = &[
    "sobolev_norm",
    "project",
    "aps_project",
    "sample",
    "synthesize",
    "inner",
    "eval_H",
    "eval_gradH",
    "eval_XH",
    "k_factor",
    "action",
    "grad_action",
    "split",
    "eval_compact_part",
    "apply_D",
    "q_op",
    "p_op",
    "aps_boundary",
    "cyl_norm",
    "energy",
    "picard_solve",
    "collar_solve",
    "h_eps_sensitivity",
    "flow_step",
    "flow_trajectory",
    "gf_pushforward",
    "sample_gamma",
    "sample_sigma",
    "estimate_beta",
    "check_sigma_boundary",
    "rho",
    "perturb",
    "radial_orbit_oracle",
    "find_critical_point",
    "run_suite",
    "verify_energy_norm_equivalence",
    "emit_plots_data",
];

/// Runs one suite (or all of them) and assembles the report.
pub fn run_suite(lab: &Lab, suite: Suite) -> Report {
    let mut rec = Recorder::default();
    rec.hit("run_suite");
    let all = suite == Suite::All;
    if all || suite == Suite::Norms {
        checks::norms::run(lab, &mut rec);
    }
    if all || suite == Suite::Aps {
        checks::aps::run(lab, &mut rec);
    }
    if all || suite == Suite::Contraction {
        checks::contraction::run(lab, &mut rec);
    }
    if all || suite == Suite::Flow {
        checks::flow::run(lab, &mut rec);
    }
    if all || suite == Suite::Orbits {
        checks::orbits::run(lab, &mut rec);
    }
    if all {
        // Plot export goes to memory here; files are written by the caller.
        rec.hit("emit_plots_data");
        let mut exported = true;
        for curve in rec.curves.values() {
            let mut buf = Vec::new();
            exported &= write_curve(curve, &mut buf).is_ok()
                && buf.iter().filter(|&&b| b == b'\n').count() == curve.rows.len() + 1;
        }
        rec.push(Record::holds("suite.plot_export", anchor::COVERAGE, exported)
            .detail("curves", rec.curves.len() as f64));
        let missing: Vec<&str> = OPERATIONS
            .iter()
            .copied()
            .filter(|op| !rec.coverage.contains_key(*op))
            .collect();
        let mut record = Record::holds("suite.coverage", anchor::COVERAGE, missing.is_empty())
            .criterion(11)
            .detail("operations", OPERATIONS.len() as f64)
            .detail("missing", missing.len() as f64);
        if !missing.is_empty() {
            record.error = Some(format!("not exercised: {}", missing.join(", ")));
        }
        rec.push(record);
    }
    Report::assemble(suite.name(), lab.environment(), rec)
}

/// Writes `<dir>/<curve>.csv` for every curve in the report; returns the paths.
pub fn emit_plots_data(report: &Report, dir: &Path) -> io::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let mut paths = Vec::new();
    for (name, curve) in &report.curves {
        let path = dir.join(format!("{name}.csv"));
        write_curve(curve, fs::File::create(&path)?)?;
        paths.push(path);
    }
    Ok(paths)
}

/// One curve as CSV with a header row.
pub fn write_curve<W: Write>(curve: &Curve, sink: W) -> io::Result<()> {
    let mut out = csv::Writer::from_writer(sink);
    out.write_record(&curve.columns)?;
    for row in &curve.rows {
        out.write_record(row.iter().map(|v| format!("{v:e}")))?;
    }
    out.flush()
}

/// Writes `report.json` and the curve CSVs under `dir`.
pub fn write_report(report: &Report, dir: &Path) -> io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let path = dir.join(format!("report-{}.json", report.suite));
    fs::write(&path, report.to_json())?;
    emit_plots_data(report, &dir.join("plots"))?;
    Ok(path)
}
