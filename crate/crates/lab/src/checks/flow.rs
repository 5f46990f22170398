//! Upward gradient flow: energy bookkeeping, the linear closed form,
//! semigroup property, stationarity on orbits and push-forward of cycles.

use actionlab::cycles::{e_plus, radial_orbit_oracle, sample_gamma};
use actionlab::hamiltonian::Variant;
use actionlab::solver::{flow_step, flow_trajectory, gf_pushforward, FLOW_CFL};
use actionlab::{FlowTrace, Loop, SobolevOrder};
use num_complex::Complex64;

use super::{anchor, guarded};
use crate::context::Lab;
use crate::report::{Curve, Record, Recorder};

/// Step used for the energy-identity checks: an eighth of the stability limit.
pub fn identity_step(lab: &Lab) -> f64 {
    FLOW_CFL / (8.0 * lab.shape.cutoff as f64)
}

pub fn default_step(lab: &Lab) -> f64 {
    FLOW_CFL / lab.shape.cutoff as f64
}

pub fn run(lab: &Lab, rec: &mut Recorder) {
    criterion_6_flow(lab, rec);
    guarded(rec, "flow.semigroup", anchor::SEMIGROUP, None, |rec| semigroup(lab, rec));
    guarded(rec, "flow.stationary_orbits", anchor::STATIONARY, None, |rec| {
        stationary(lab, rec)
    });
    guarded(rec, "flow.pushforward", anchor::PUSHFORWARD, None, |rec| pushforward(lab, rec));
}

fn relative_defect(trace: &FlowTrace) -> f64 {
    trace.identity_defect() / (1.0 + trace.total_energy())
}

fn action_curve(trace: &FlowTrace, rows: usize) -> Curve {
    let mut curve = Curve::new(&["t", "action", "cumulative_energy", "norm"]);
    let stride = (trace.times.len() / rows).max(1);
    for k in (0..trace.times.len()).step_by(stride) {
        curve.push(vec![
            trace.times[k],
            trace.actions[k],
            trace.cumulative_energy[k],
            trace.norms[k],
        ]);
    }
    curve
}

/// Energy identity along flow lines and the linear closed form.
pub fn criterion_6_flow(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c06.flow_energy_identity", anchor::ENERGY_IDENTITY, Some(6), |rec| {
        rec.hit("flow_trajectory");
        let model = lab.model();
        let dt = identity_step(lab);
        let mut rng = lab.rng(61);
        let mut starts: Vec<(&str, Loop, f64)> = Vec::new();
        let noise = Loop::random(lab.shape, 2.0, &mut rng);
        let noise = noise.scaled(0.01 / noise.sobolev_norm(SobolevOrder::Zero));
        starts.push(("gamma_seed", e_plus(lab.shape).scaled(1.45).add(&noise)?, 0.5));
        let g = Loop::random(lab.shape, 2.0, &mut rng);
        starts.push(("random", g.scaled(1.0 / g.sobolev_norm(SobolevOrder::Zero)), 0.25));
        if model.variant() == Variant::Bump && lab.shape.cutoff >= 2 {
            let orbit = radial_orbit_oracle(model, lab.shape, 2)?.orbit;
            starts.push(("near_orbit", orbit.add(&noise)?, 0.5));
        }
        let mut worst: f64 = 0.0;
        let mut max_energy: f64 = 0.0;
        for (name, start, t_end) in &starts {
            let trace = flow_trajectory(model, start, *t_end, dt)?;
            worst = worst.max(relative_defect(&trace));
            max_energy = max_energy.max(trace.total_energy());
            if *name == "gamma_seed" {
                rec.curve("flow_action", action_curve(&trace, 200));
            }
        }
        rec.push(
            Record::upper("c06.flow_energy_identity", anchor::ENERGY_IDENTITY, worst, 1e-5)
                .criterion(6)
                .detail("dt", dt)
                .detail("trajectories", starts.len() as f64)
                .detail("max_energy", max_energy),
        );

        // Single modes inside the flat region: c_n(t) = α e^{nt}.
        let mut closed: f64 = 0.0;
        for (n, alpha, t_end) in [(1i64, 0.1, 1.0), (3, 0.02, 0.5), (-2, 0.3, 1.0)] {
            if n.unsigned_abs() as usize > lab.shape.cutoff {
                continue;
            }
            let start = Loop::single_mode(lab.shape, n, 0, Complex64::new(alpha, 0.0))?;
            let trace = flow_trajectory(model, &start, t_end, default_step(lab))?;
            let nf = n as f64;
            let exact = 0.5 * nf * alpha * alpha * ((2.0 * nf * t_end).exp() - 1.0);
            let scale = exact.abs().max(1.0);
            let delta = trace.actions.last().unwrap() - trace.actions[0];
            closed = closed
                .max((delta - exact).abs() / scale)
                .max((trace.total_energy() - exact).abs() / scale);
        }
        rec.push(Record::upper("c06.linear_flow_closed_form", anchor::LINEAR_FLOW, closed, 1e-8).criterion(6));
        Ok(())
    });
}

fn semigroup(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("flow_step");
    let model = lab.model();
    let dt = 0.5 * default_step(lab);
    let mut rng = lab.rng(62);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let g = Loop::random(lab.shape, 2.0, &mut rng);
        // Keep |γ|² well inside the flat region along both paths.
        let g = g.scaled(0.05 * model.s0().sqrt() / g.sobolev_norm(SobolevOrder::Zero).max(1e-300));
        let twice = flow_step(model, &flow_step(model, &g, dt)?, dt)?;
        let once = flow_step(model, &g, 2.0 * dt)?;
        worst = worst.max(twice.max_abs_diff(&once)? / g.sobolev_norm(SobolevOrder::Zero));
    }
    rec.push(Record::upper("flow.semigroup", anchor::SEMIGROUP, worst, 1e-14));
    Ok(())
}

fn stationary(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    let model = lab.model();
    if model.variant() != Variant::Bump {
        return Ok(());
    }
    let t_end = 0.25;
    for k in [1i64, 2] {
        let orbit = radial_orbit_oracle(model, lab.shape, k)?.orbit;
        let trace = flow_trajectory(model, &orbit, t_end, default_step(lab))?;
        let rate = trace.final_loop.max_abs_diff(&orbit)? / t_end;
        rec.push(Record::upper(format!("flow.stationary_k{k}"), anchor::STATIONARY, rate, 1e-8));
    }
    Ok(())
}

fn pushforward(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("gf_pushforward");
    rec.hit("sample_gamma");
    let model = lab.model();
    let points = sample_gamma(lab.shape, 1.45, 8, lab.seed(63))?;
    let traces = gf_pushforward(model, &points, 0.05, default_step(lab));
    let mut min_gain = f64::INFINITY;
    for t in traces {
        let t = t?;
        min_gain = min_gain.min(t.actions.last().unwrap() - t.actions[0]);
    }
    rec.push(Record::lower("flow.pushforward_action_increases", anchor::PUSHFORWARD, min_gain, 0.0));
    Ok(())
}
