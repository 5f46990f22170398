use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use actionlab::cycles::{
    check_sigma_boundary, e_plus, estimate_beta, find_critical_point, intersection_scan, scan_alpha,
    select_tau, transversality,
};
use actionlab::solver::{collar_solve, flow_trajectory, FLOW_CFL};
use actionlab::{Loop, SobolevOrder};
use clap::{Parser, Subcommand};
use lab::checks::{contraction, orbits};
use lab::suites::write_report;
use lab::{run_suite, Config, Lab, Suite};
use serde::Serialize;

#[derive(Parser)]
#[command(name = "lab", version, about = "Action functional verification lab")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// JSON config; omitted fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory, overriding `output_dir` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Run a verification suite and write the JSON report.
    Verify {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "all")]
        suite: Suite,
    },
    /// Solve the cylinder problem for the configured boundary loop.
    SolveCylinder {
        #[command(flatten)]
        common: Common,
    },
    /// Integrate the upward gradient flow.
    Flow {
        #[command(flatten)]
        common: Common,
    },
    /// Flow and Newton from a seed loop to a critical point.
    FindOrbit {
        #[command(flatten)]
        common: Common,
    },
    /// Estimate β over a grid of radii α.
    ScanAlpha {
        #[command(flatten)]
        common: Common,
    },
    /// Check the boundary sign and intersection of the two cycles.
    CheckCycles {
        #[command(flatten)]
        common: Common,
    },
}

enum Failure {
    Usage(String),
    Run(String),
}

impl From<actionlab::LabError> for Failure {
    fn from(e: actionlab::LabError) -> Self {
        Failure::Run(e.to_string())
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}

fn setup(common: &Common) -> Result<(Lab, PathBuf), Failure> {
    let config = match &common.config {
        Some(path) => Config::load(path),
        None => Config::from_json("{}"),
    }
    .map_err(|e| Failure::Usage(e.to_string()))?;
    let out = common.out.clone().unwrap_or_else(|| config.output_dir.clone());
    fs::create_dir_all(&out)?;
    let lab = Lab::new(config).map_err(|e| Failure::Usage(e.to_string()))?;
    Ok((lab, out))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), Failure> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Run(e.to_string()))?;
    fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn csv_file(path: &Path) -> Result<BufWriter<File>, Failure> {
    println!("wrote {}", path.display());
    Ok(BufWriter::new(File::create(path)?))
}

/// `α` from the config, otherwise the maximizer of the α scan together with its β.
fn alpha_and_beta(lab: &Lab, configured: Option<f64>) -> Result<(f64, Option<f64>), Failure> {
    match configured {
        Some(a) => Ok((a, None)),
        None => {
            let scan = lab.alpha_scan()?;
            Ok((scan.alpha_star, Some(scan.beta_star)))
        }
    }
}

fn run(command: Command) -> Result<bool, Failure> {
    match command {
        Command::Verify { common, suite } => {
            let (lab, out) = setup(&common)?;
            let report = run_suite(&lab, suite);
            for r in report.failing() {
                println!(
                    "FAIL {}: computed {:e}, bound {:e}{}",
                    r.name,
                    r.computed,
                    r.bound,
                    r.error.as_deref().map(|e| format!(" ({e})")).unwrap_or_default()
                );
            }
            let path = write_report(&report, &out)?;
            println!(
                "{}: {} records, {} failing; report at {}",
                report.suite,
                report.records.len(),
                report.failures,
                path.display()
            );
            Ok(report.passed)
        }
        Command::SolveCylinder { common } => {
            let (lab, out) = setup(&common)?;
            let section = &lab.config.solve_cylinder;
            let boundary = match &section.boundary {
                Some(b) => b.clone(),
                None => contraction::default_boundary(&lab)?,
            };
            let grid = lab.grid(section.eps)?;
            let result = collar_solve(lab.model(), &boundary, &grid, &lab.solver_options())?;
            write_json(&out.join("solve_cylinder.json"), &result)?;
            if section.write_csv {
                result.u.write_csv(csv_file(&out.join("cylinder.csv"))?)?;
            }
            Ok(true)
        }
        Command::Flow { common } => {
            let (lab, out) = setup(&common)?;
            let section = &lab.config.flow;
            let start = match &section.initial {
                Some(g) => g.clone(),
                None => e_plus(lab.shape).scaled(section.alpha),
            };
            let dt = section.dt.unwrap_or(FLOW_CFL / lab.shape.cutoff as f64);
            let trace = flow_trajectory(lab.model(), &start, section.t_end, dt)?;
            write_json(&out.join("flow.json"), &trace)?;
            trace.write_csv(csv_file(&out.join("flow.csv"))?)?;
            Ok(true)
        }
        Command::FindOrbit { common } => {
            let (lab, out) = setup(&common)?;
            let section = &lab.config.find_orbit;
            let (seed, beta) = match &section.seed {
                Some(g) => (g.clone(), None),
                None => {
                    let (alpha, beta) = alpha_and_beta(&lab, section.alpha)?;
                    (orbits::winding_seed(&lab, alpha, section.winding)?, beta)
                }
            };
            let orbit = find_critical_point(
                lab.model(),
                &seed,
                section.flow_time,
                1e-3 * lab.config.tolerances.gradient,
                beta,
            )?;
            write_json(&out.join("orbit.json"), &orbit)?;
            write_loop_csv(&orbit.orbit, csv_file(&out.join("orbit.csv"))?)?;
            Ok(orbit.gradient_norm <= lab.config.tolerances.gradient)
        }
        Command::ScanAlpha { common } => {
            let (lab, out) = setup(&common)?;
            let samples = &lab.config.samples;
            let alphas = lab.config.scan_alpha.grid();
            let results = scan_alpha(
                lab.model(),
                lab.shape,
                &alphas,
                samples.beta_starts,
                samples.descent_steps,
                lab.seed(71),
            );
            let mut w = csv::Writer::from_writer(csv_file(&out.join("scan_alpha.csv"))?);
            let run_err = |e: csv::Error| Failure::Run(e.to_string());
            w.write_record(["alpha", "beta", "status"]).map_err(run_err)?;
            let mut best: Option<(f64, f64)> = None;
            for (alpha, beta) in results {
                let (value, status) = match beta {
                    Ok(b) => {
                        if best.is_none_or(|(_, bb)| b > bb) {
                            best = Some((alpha, b));
                        }
                        (format!("{b:e}"), "positive".to_string())
                    }
                    Err(actionlab::LabError::NegativeBeta { value }) => {
                        (format!("{value:e}"), "nonpositive".to_string())
                    }
                    Err(e) => (String::new(), e.to_string()),
                };
                w.write_record([format!("{alpha:e}"), value, status]).map_err(run_err)?;
            }
            w.flush()?;
            match best {
                Some((a, b)) => {
                    println!("alpha* = {a}, beta = {b}");
                    Ok(true)
                }
                None => {
                    println!("no radius gives a positive lower bound");
                    Ok(false)
                }
            }
        }
        Command::CheckCycles { common } => {
            let (lab, out) = setup(&common)?;
            let section = &lab.config.check_cycles;
            let samples = &lab.config.samples;
            let (alpha, _) = alpha_and_beta(&lab, section.alpha)?;
            let beta = estimate_beta(
                lab.model(),
                lab.shape,
                alpha,
                samples.beta_starts,
                samples.descent_steps,
                lab.seed(91),
            );
            let ep = e_plus(lab.shape);
            let start = section.tau_start.max(alpha);
            let (tau, _) = select_tau(lab.model(), &ep, start, samples.sigma_boundary, lab.seed(92))?;
            let boundary_max = check_sigma_boundary(lab.model(), tau, &ep, samples.sigma_boundary, lab.seed(93))?;
            let scan = intersection_scan(
                alpha,
                tau,
                &ep,
                section.scan_resolution,
                section.scan_directions,
                lab.seed(94),
                1e-9,
            )?;
            let tr = transversality(&ep)?;
            let summary = CycleSummary {
                alpha,
                beta: beta.as_ref().ok().copied(),
                beta_error: beta.as_ref().err().map(|e| e.to_string()),
                tau,
                boundary_max,
                e_plus_norm: ep.sobolev_norm(SobolevOrder::Half),
                intersection: scan,
                transversality: tr,
            };
            let ok = summary.beta.is_some_and(|b| b > 0.0)
                && boundary_max <= 0.0
                && summary.intersection.hits >= 1
                && summary.intersection.max_hit_offset <= 1e-9
                && summary.transversality.rank == summary.transversality.dimension;
            write_json(&out.join("check_cycles.json"), &summary)?;
            println!("{}", if ok { "cycles: ok" } else { "cycles: FAILED" });
            Ok(ok)
        }
    }
}

#[derive(Serialize)]
struct CycleSummary {
    alpha: f64,
    beta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    beta_error: Option<String>,
    tau: f64,
    boundary_max: f64,
    e_plus_norm: f64,
    intersection: actionlab::cycles::IntersectionScan,
    transversality: actionlab::cycles::Transversality,
}

/// `mode,re,im`, with a `coord` column after `mode` when `d > 1`.
fn write_loop_csv<W: Write>(g: &Loop, sink: W) -> Result<(), Failure> {
    let run_err = |e: csv::Error| Failure::Run(e.to_string());
    let mut w = csv::Writer::from_writer(sink);
    let multi = g.shape().dim > 1;
    if multi {
        w.write_record(["mode", "coord", "re", "im"]).map_err(run_err)?;
    } else {
        w.write_record(["mode", "re", "im"]).map_err(run_err)?;
    }
    for (n, coeffs) in g.modes() {
        for (i, z) in coeffs.iter().enumerate() {
            if multi {
                w.serialize((n, i, z.re, z.im)).map_err(run_err)?;
            } else {
                w.serialize((n, z.re, z.im)).map_err(run_err)?;
            }
        }
    }
    w.flush()?;
    Ok(())
}
