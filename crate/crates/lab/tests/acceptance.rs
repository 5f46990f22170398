//! The eleven acceptance criteria at default settings. Prints one line per
//! criterion and exits nonzero if any fails.

use std::process::{Command, ExitCode};
use std::time::Instant;

use lab::checks::{aps, contraction, flow, norms, orbits};
use lab::report::{Record, Recorder};
use lab::suites::OPERATIONS;
use lab::{Config, Lab};

type Check = fn(&Lab, &mut Recorder);

fn criteria() -> Vec<(u8, &'static str, Vec<Check>)> {
    vec![
        (1, "APS closed-form boundary defect", vec![aps::criterion_1]),
        (2, "right inverse of D", vec![aps::criterion_2]),
        (3, "uniformity in eps", vec![aps::criterion_3]),
        (4, "Sobolev L4 inequality", vec![aps::criterion_4]),
        (5, "contraction solver", vec![contraction::criterion_5]),
        (6, "energy identity", vec![contraction::criterion_6_cylinders, flow::criterion_6_flow]),
        (7, "gradient consistency", vec![norms::criterion_7]),
        (8, "critical points vs oracle", vec![orbits::criterion_8]),
        (9, "cycle geometry", vec![orbits::criterion_9]),
        (10, "resonance contrast", vec![norms::criterion_10]),
    ]
}

fn describe(r: &Record) -> String {
    let err = r.error.as_deref().map(|e| format!(" error: {e}")).unwrap_or_default();
    format!("{} computed {:e} {:?} bound {:e}{err}", r.name, r.computed, r.kind, r.bound)
}

fn report_line(c: u8, title: &str, records: &[&Record], extra: &[String], seconds: f64) -> bool {
    let failing: Vec<&&Record> = records.iter().filter(|r| !r.pass).collect();
    let pass = !records.is_empty() && failing.is_empty() && extra.is_empty();
    println!(
        "{} criterion {c:>2}: {title} ({} records, {seconds:.1}s)",
        if pass { "PASS" } else { "FAIL" },
        records.len()
    );
    for r in failing {
        println!("       {}", describe(r));
    }
    for e in extra {
        println!("       {e}");
    }
    pass
}

/// Runs `lab verify --suite all` into a fresh directory and returns the exit
/// code with the report bytes.
fn verify_once() -> Result<(i32, Vec<u8>), String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let status = Command::new(env!("CARGO_BIN_EXE_lab"))
        .args(["verify", "--suite", "all", "--out"])
        .arg(dir.path())
        .output()
        .map_err(|e| e.to_string())?;
    let bytes = std::fs::read(dir.path().join("report-all.json")).map_err(|e| e.to_string())?;
    Ok((status.status.code().unwrap_or(-1), bytes))
}

fn criterion_11() -> (Vec<Record>, Vec<String>) {
    let mut problems = Vec::new();
    let runs: Vec<(i32, Vec<u8>)> = match (verify_once(), verify_once()) {
        (Ok(a), Ok(b)) => vec![a, b],
        (Err(e), _) | (_, Err(e)) => return (Vec::new(), vec![format!("run failed: {e}")]),
    };
    for (i, (code, _)) in runs.iter().enumerate() {
        if *code != 0 {
            problems.push(format!("run {} exited with {code}", i + 1));
        }
    }
    if runs[0].1 != runs[1].1 {
        problems.push("reports differ between identical runs".into());
    }
    let report: serde_json::Value = match serde_json::from_slice(&runs[0].1) {
        Ok(v) => v,
        Err(e) => return (Vec::new(), vec![format!("unreadable report: {e}")]),
    };
    let coverage = report["coverage"].as_object().cloned().unwrap_or_default();
    let missing: Vec<&str> = OPERATIONS.iter().copied().filter(|op| !coverage.contains_key(*op)).collect();
    if !missing.is_empty() {
        problems.push(format!("not covered: {}", missing.join(", ")));
    }
    let records = vec![
        Record::holds("c11.exit_zero", "", runs.iter().all(|r| r.0 == 0)).criterion(11),
        Record::holds("c11.bit_identical", "", runs[0].1 == runs[1].1).criterion(11),
        Record::holds("c11.coverage", "", missing.is_empty()).criterion(11),
        Record::holds("c11.report_passed", "", report["passed"] == serde_json::Value::Bool(true)).criterion(11),
    ];
    (records, problems)
}

fn main() -> ExitCode {
    // `cargo test -- --list` and filters are not meaningful here.
    if std::env::args().any(|a| a == "--list") {
        println!("acceptance: test");
        return ExitCode::SUCCESS;
    }
    let start = Instant::now();
    let lab = match Lab::new(Config::default()) {
        Ok(lab) => lab,
        Err(e) => {
            println!("FAIL setup: {e}");
            return ExitCode::FAILURE;
        }
    };
    println!("acceptance suite (defaults, seed {})", lab.config.seed);
    let mut all = true;
    for (c, title, checks) in criteria() {
        let t = Instant::now();
        let mut rec = Recorder::default();
        for check in checks {
            check(&lab, &mut rec);
        }
        let tagged: Vec<&Record> = rec.records.iter().filter(|r| r.criterion == Some(c)).collect();
        let stray: Vec<String> = rec
            .records
            .iter()
            .filter(|r| r.criterion != Some(c) && !r.pass)
            .map(describe)
            .collect();
        all &= report_line(c, title, &tagged, &stray, t.elapsed().as_secs_f64());
    }
    let t = Instant::now();
    let (records, problems) = criterion_11();
    let refs: Vec<&Record> = records.iter().collect();
    all &= report_line(11, "determinism and coverage", &refs, &problems, t.elapsed().as_secs_f64());
    println!(
        "{} in {:.1}s",
        if all { "all criteria passed" } else { "some criteria FAILED" },
        start.elapsed().as_secs_f64()
    );
    if all {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
