//! Cycles `Γ_α`, `Σ_τ`, the perturbation map and the critical-point finder
//! against the radial oracle.

use actionlab::cycles::{
    check_sigma_boundary, e_plus, estimate_beta, find_critical_point, intersection_scan,
    l2_2_norm_sqr, perturb, perturbation_bound, radial_orbit_oracle, rho, sample_gamma,
    sample_sigma, select_tau, transversality,
};
use actionlab::hamiltonian::Variant;
use actionlab::{Loop, OrbitResult, Sector, SobolevOrder};
use num_complex::Complex64;
use rand::Rng;

use super::{anchor, guarded};
use crate::context::Lab;
use crate::report::{Curve, Record, Recorder};

pub fn run(lab: &Lab, rec: &mut Recorder) {
    criterion_8(lab, rec);
    criterion_9(lab, rec);
    guarded(rec, "cycles.samplers", anchor::CYCLES, None, |rec| samplers(lab, rec));
    guarded(rec, "cycles.rho", anchor::RHO, None, rho_values);
    guarded(rec, "cycles.perturbation", anchor::PERTURBATION, None, |rec| {
        perturbation(lab, rec)
    });
    guarded(rec, "cycles.random_seeds", anchor::CRITICAL, None, |rec| random_seeds(lab, rec));
    guarded(rec, "cycles.finder_edge_cases", anchor::CRITICAL, None, |rec| {
        finder_edge_cases(lab, rec)
    });
}

/// `(α/√k)e^{ikθ}e₁`, a point of `Γ_α`.
pub fn winding_seed(lab: &Lab, alpha: f64, k: i64) -> actionlab::Result<Loop> {
    Loop::single_mode(lab.shape, k, 0, Complex64::new(alpha / (k as f64).sqrt(), 0.0))
}

fn newton_tol(lab: &Lab) -> f64 {
    1e-3 * lab.config.tolerances.gradient
}

fn record_orbit(rec: &mut Recorder, prefix: &str, found: &OrbitResult, oracle: &OrbitResult, beta: f64, lab: &Lab) {
    let model = lab.model();
    let level = (2.0 * model.dh(found.radius * found.radius) - found.winding as f64).abs();
    let c = |r: Record| r.criterion(8);
    rec.push(c(Record::upper(
        format!("{prefix}.radius_vs_oracle"),
        anchor::ORACLE,
        (found.radius - oracle.radius).abs(),
        1e-6,
    )
    .detail("radius", found.radius)
    .detail("oracle_radius", oracle.radius)));
    rec.push(c(Record::upper(
        format!("{prefix}.action_vs_oracle"),
        anchor::ORACLE,
        (found.action - oracle.action).abs(),
        1e-6,
    )
    .detail("action", found.action)
    .detail("oracle_action", oracle.action)));
    rec.push(c(Record::upper(
        format!("{prefix}.gradient_norm"),
        anchor::CRITICAL,
        found.gradient_norm,
        lab.config.tolerances.gradient,
    )
    .detail("newton_iterations", found.newton_iterations as f64)
    .detail("flow_time", found.flow_time)));
    rec.push(c(Record::lower(format!("{prefix}.action_above_beta"), anchor::CRITICAL, found.action, beta)));
    rec.push(c(Record::upper(
        format!("{prefix}.winding"),
        anchor::ORACLE,
        (found.winding - oracle.winding).abs() as f64,
        0.0,
    )));
    rec.push(c(Record::upper(format!("{prefix}.level_equation"), anchor::ORACLE, level, 1e-8)));
    rec.push(c(Record::upper(
        format!("{prefix}.radial_action"),
        anchor::ORACLE,
        found.radial_action_defect(model),
        1e-6,
    )));
}

/// Winding-1 and winding-2 orbits from `Γ_{α*}` seeds against the oracle.
pub fn criterion_8(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c08.critical_points", anchor::CRITICAL, Some(8), |rec| {
        rec.hit("find_critical_point");
        rec.hit("radial_orbit_oracle");
        rec.hit("estimate_beta");
        let model = lab.model();
        let scan = lab.alpha_scan()?;
        let (alpha, beta) = (scan.alpha_star, scan.beta_star);
        rec.push(
            Record::lower("c08.beta_positive", anchor::BETA, beta, f64::MIN_POSITIVE)
                .criterion(8)
                .detail("alpha_star", alpha),
        );
        let flow_time = lab.config.find_orbit.flow_time;
        for k in [1i64, 2] {
            let oracle = radial_orbit_oracle(model, lab.shape, k)?;
            let oracle_grad = oracle.gradient_norm;
            rec.push(
                Record::upper(format!("c08.oracle_k{k}.gradient"), anchor::ORACLE, oracle_grad, 1e-8)
                    .criterion(8),
            );
            let seed = winding_seed(lab, alpha, k)?;
            let found = find_critical_point(model, &seed, flow_time, newton_tol(lab), Some(beta))?;
            record_orbit(rec, &format!("c08.winding_{k}"), &found, &oracle, beta, lab);
        }

        Ok(())
    });
}

/// `β > 0`, `CSD_H|∂Σ_τ ≤ 0` and the transverse intersection at `α*e⁺`.
pub fn criterion_9(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c09.cycle_geometry", anchor::INTERSECTION, Some(9), |rec| {
        rec.hit("check_sigma_boundary");
        rec.hit("sample_sigma");
        let model = lab.model();
        let scan = lab.alpha_scan()?;
        let mut curve = Curve::new(&["alpha", "beta"]);
        for (a, b) in scan.alphas.iter().zip(&scan.betas) {
            curve.push(vec![*a, b.unwrap_or(f64::NAN)]);
        }
        rec.curve("alpha_scan", curve);
        let alpha = scan.alpha_star;
        // Fresh estimate at α* with a different seed stream.
        let beta = estimate_beta(
            model,
            lab.shape,
            alpha,
            lab.config.samples.beta_starts,
            lab.config.samples.descent_steps,
            lab.seed(91),
        )?;
        rec.push(
            Record::lower("c09.beta_positive", anchor::BETA, beta, f64::MIN_POSITIVE)
                .criterion(9)
                .detail("alpha_star", alpha)
                .detail("scan_beta", scan.beta_star),
        );

        let ep = e_plus(lab.shape);
        let cfg = &lab.config.check_cycles;
        let samples = lab.config.samples.sigma_boundary;
        let start = cfg.tau_start.max(alpha);
        let (tau, _) = select_tau(model, &ep, start, samples, lab.seed(92))?;
        let worst = check_sigma_boundary(model, tau, &ep, samples, lab.seed(93))?;
        rec.push(
            Record::upper("c09.sigma_boundary", anchor::SIGMA_BOUNDARY, worst, 0.0)
                .criterion(9)
                .detail("tau_star", tau),
        );
        // Larger τ keeps the boundary nonpositive.
        let doubled = check_sigma_boundary(model, 2.0 * tau, &ep, samples, lab.seed(93))?;
        rec.push(Record::upper("c09.sigma_boundary_2tau", anchor::SIGMA_BOUNDARY, doubled, 0.0).criterion(9));

        let tol = 1e-9;
        let hits = intersection_scan(alpha, tau, &ep, cfg.scan_resolution, cfg.scan_directions, lab.seed(94), tol)?;
        rec.push(
            Record::upper("c09.intersection_single_point", anchor::INTERSECTION, hits.max_hit_offset, tol)
                .criterion(9)
                .detail("samples", hits.samples as f64)
                .detail("hits", hits.hits as f64),
        );
        rec.push(
            Record::upper("c09.intersection_point_on_gamma", anchor::INTERSECTION, hits.point_distance, 1e-12)
                .criterion(9),
        );
        rec.push(Record::lower("c09.intersection_found", anchor::INTERSECTION, hits.hits as f64, 1.0).criterion(9));
        let tr = transversality(&ep)?;
        rec.push(
            Record::lower("c09.transversality_rank", anchor::INTERSECTION, tr.rank as f64, tr.dimension as f64)
                .criterion(9)
                .detail("min_singular", tr.min_singular)
                .detail("max_singular", tr.max_singular),
        );
        rec.push(
            Record::lower("c09.transversality_min_singular", anchor::INTERSECTION, tr.min_singular, 1e-8)
                .criterion(9),
        );
        Ok(())
    });
}

fn samplers(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("sample_gamma");
    rec.hit("sample_sigma");
    let (alpha, tau) = (1.3, 3.0);
    let ep = e_plus(lab.shape);
    let mut gamma_err: f64 = 0.0;
    for g in sample_gamma(lab.shape, alpha, 50, lab.seed(101))? {
        gamma_err = gamma_err
            .max((g.sobolev_norm(SobolevOrder::Half) - alpha).abs())
            .max(g.project(Sector::Minus).sobolev_norm(SobolevOrder::Zero));
    }
    rec.push(Record::upper("cycles.gamma_samples", anchor::CYCLES, gamma_err, 1e-12));

    let decompose = |p: &Loop| -> actionlab::Result<(f64, f64, f64)> {
        let s = p.inner(&ep, SobolevOrder::Half)?;
        let mut minus = p.clone();
        minus.axpy(-s, &ep)?;
        let off = minus.project(Sector::Plus).sobolev_norm(SobolevOrder::Zero);
        Ok((minus.sobolev_norm(SobolevOrder::Half), s, off))
    };
    let (mut inside, mut face) = (true, 0.0f64);
    for p in sample_sigma(tau, &ep, 100, lab.seed(102), false)? {
        let (r, s, off) = decompose(&p)?;
        inside &= r <= tau * (1.0 + 1e-12) && (-1e-12..=tau + 1e-12).contains(&s) && off < 1e-12;
    }
    for p in sample_sigma(tau, &ep, 100, lab.seed(103), true)? {
        let (r, s, _) = decompose(&p)?;
        let d = (r - tau).abs().min(s.abs()).min((s - tau).abs());
        face = face.max(d);
    }
    rec.push(Record::holds("cycles.sigma_samples_inside", anchor::CYCLES, inside));
    rec.push(Record::upper("cycles.sigma_boundary_faces", anchor::CYCLES, face, 1e-12));
    Ok(())
}

fn rho_values(rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("rho");
    let mut err: f64 = 0.0;
    for x in [-1.0, -0.3, 0.0, 0.5, 1.0] {
        err = err.max((rho(x) - 1.0).abs());
    }
    for x in [2.0, 3.0, -5.0, 40.0] {
        err = err.max((rho(x) - 1.0 / (x * x)).abs());
    }
    // C¹ across the joints and monotone in between.
    let h = 1e-7;
    for x in [1.0, 2.0] {
        let left = (rho(x) - rho(x - h)) / h;
        let right = (rho(x + h) - rho(x)) / h;
        err = err.max((left - right).abs() * 1e-2);
    }
    let monotone = (0..=1000)
        .map(|i| 1.0 + i as f64 / 1000.0)
        .collect::<Vec<_>>()
        .windows(2)
        .all(|w| rho(w[1]) <= rho(w[0]) && rho(w[1]) > 0.0);
    rec.push(Record::upper("cycles.rho_values", anchor::RHO, err, 1e-6));
    rec.push(Record::holds("cycles.rho_monotone_positive", anchor::RHO, monotone));
    Ok(())
}

fn perturbation(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("perturb");
    let model = lab.model();
    let grid = lab.theta();
    let bound = perturbation_bound(model);
    let mut rng = lab.rng(104);
    let mut worst: f64 = 0.0;
    let mut identity: f64 = 0.0;
    for k in 0..lab.config.samples.perturbation {
        // Base points over three orders of magnitude of norm.
        let g = Loop::random(lab.shape, 1.5, &mut rng);
        let size = 10f64.powf(-1.0 + 3.0 * (k as f64 + 0.5) / lab.config.samples.perturbation as f64);
        let g = g.scaled(size / g.sobolev_norm(SobolevOrder::Half));
        let v = Loop::random(lab.shape, 3.0, &mut rng);
        let v = v.scaled(rng.random_range(0.0..1.0) / l2_2_norm_sqr(&v).sqrt());
        let moved = perturb(&g, &v)?;
        worst = worst.max((model.action(&moved, grid)? - model.action(&g, grid)?).abs());
        identity = identity.max(perturb(&g, &Loop::zeros(lab.shape))?.max_abs_diff(&g)?);
    }
    rec.push(Record::upper("cycles.perturbation_bounded", anchor::PERTURBATION, worst, bound).detail("bound", bound));
    rec.push(Record::upper("cycles.perturb_zero_is_identity", anchor::PERTURBATION, identity, 0.0));
    let outside = Loop::single_mode(lab.shape, 1, 0, Complex64::new(1.0, 0.0))?;
    rec.push(Record::holds(
        "cycles.perturb_rejects_outside_ball",
        anchor::PERTURBATION,
        perturb(&outside, &outside).is_err(),
    ));
    Ok(())
}

/// Random seeds on `Γ_{α*}` spanned by the windings below the slope. Seeds
/// that converge must land on a known orbit above `β`; the rest escape
/// upward through the modes the nonlinearity couples in.
fn random_seeds(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    let model = lab.model();
    if model.variant() != Variant::Bump {
        return Ok(());
    }
    let scan = lab.alpha_scan()?;
    let oracles = [radial_orbit_oracle(model, lab.shape, 1)?, radial_orbit_oracle(model, lab.shape, 2)?];
    let mut rng = lab.rng(81);
    let (mut converged, mut escaped, mut worst_gap, mut worst_match) = (0usize, 0usize, f64::INFINITY, 0.0f64);
    for _ in 0..8 {
        let mut g = Loop::zeros(lab.shape);
        for n in [1i64, 2] {
            let z = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            g = g.add(&Loop::single_mode(lab.shape, n, 0, z)?)?;
        }
        let g = g.scaled(scan.alpha_star / g.sobolev_norm(SobolevOrder::Half));
        match find_critical_point(model, &g, lab.config.find_orbit.flow_time, newton_tol(lab), Some(scan.beta_star)) {
            Ok(found) => {
                converged += 1;
                worst_gap = worst_gap.min(found.action - scan.beta_star);
                let closest = oracles
                    .iter()
                    .map(|o| (found.action - o.action).abs())
                    .fold(f64::INFINITY, f64::min);
                worst_match = worst_match.max(closest);
            }
            Err(actionlab::LabError::Blowup { .. }) => escaped += 1,
            Err(e) => return Err(e),
        }
    }
    if converged == 0 {
        // Nothing to compare: fail rather than pass vacuously.
        (worst_gap, worst_match) = (f64::NAN, f64::NAN);
    }
    rec.push(
        Record::lower("cycles.random_seed_actions_above_beta", anchor::CRITICAL, worst_gap, 0.0)
            .detail("converged", converged as f64)
            .detail("escaped", escaped as f64),
    );
    rec.push(Record::upper("cycles.random_seed_orbits_known", anchor::ORACLE, worst_match, 1e-6));
    Ok(())
}

fn finder_edge_cases(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    let model = lab.model();
    if model.variant() != Variant::Bump {
        return Ok(());
    }
    let oracle = radial_orbit_oracle(model, lab.shape, 1)?;
    let again = find_critical_point(model, &oracle.orbit, 1.0, lab.config.tolerances.gradient, None)?;
    rec.push(
        Record::upper("cycles.finder_oracle_seed_steps", anchor::CRITICAL, again.newton_iterations as f64, 1.0)
            .detail("drift", again.orbit.max_abs_diff(&oracle.orbit)?),
    );
    let zero = find_critical_point(model, &Loop::zeros(lab.shape), 1.0, lab.config.tolerances.gradient, Some(0.1))?;
    rec.push(Record::holds(
        "cycles.finder_zero_seed_flagged",
        anchor::CRITICAL,
        zero.below_beta && zero.action == 0.0,
    ));
    let no_root = radial_orbit_oracle(model, lab.shape, 3).is_err() || 2.0 * model.slope() > 3.0;
    rec.push(Record::holds("cycles.oracle_no_root_beyond_range", anchor::ORACLE, no_root));
    Ok(())
}
