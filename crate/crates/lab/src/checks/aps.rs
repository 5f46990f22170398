//! Boundary-value operators on short cylinders: closed forms, the right
//! inverse, uniform operator norms and the L⁴ estimates.

use actionlab::cycles::radial_orbit_oracle;
use actionlab::hamiltonian::Variant;
use actionlab::{BoundaryData, CylinderMap, CylinderNorm, Loop, Sector, SobolevOrder, TimeGrid};
use num_complex::Complex64;
use rand::Rng;

use super::{anchor, guarded, rel_err};
use crate::context::Lab;
use crate::modal;
use crate::report::{Curve, Record, Recorder};

/// Cylinder lengths of the closed-form and Sobolev checks.
pub const FIXED_EPS: [f64; 3] = [0.5, 0.1, 0.01];

pub fn run(lab: &Lab, rec: &mut Recorder) {
    criterion_1(lab, rec);
    criterion_2(lab, rec);
    criterion_3(lab, rec);
    criterion_4(lab, rec);
    guarded(rec, "cylinder.q_boundary", anchor::APS_Q, None, |rec| q_boundary(lab, rec));
    guarded(rec, "cylinder.l4_smallness", anchor::L4_SMALL, None, |rec| {
        l4_smallness(lab, rec)
    });
    guarded(rec, "cylinder.mixed_l4", anchor::MIXED_L4, None, |rec| mixed_l4(lab, rec));
    guarded(rec, "cylinder.nonlinear_lipschitz", anchor::NONLINEAR_LIPSCHITZ, None, |rec| {
        nonlinear_lipschitz(lab, rec)
    });
    guarded(rec, "cylinder.orbit_energy", anchor::CYLINDER_ENERGY, None, |rec| {
        orbit_energy(lab, rec)
    });
}

/// Unit `L²` datum on mode `n`, placed at the end the APS data lives on.
fn unit_datum(lab: &Lab, n: i64) -> actionlab::Result<BoundaryData> {
    let phi = Loop::single_mode(lab.shape, n, 0, Complex64::new(1.0, 0.0))?;
    Ok(BoundaryData::decompose(&phi))
}

/// Per-mode `Q` identities for `λ = 1..N` on modes `n = −λ`.
pub fn criterion_1(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c01.aps_identity", anchor::APS_DEFECT, Some(1), |rec| {
        rec.hit("q_op");
        let (mut defect_err, mut energy_err): (f64, f64) = (0.0, 0.0);
        let mut min_margin = f64::INFINITY;
        for &eps in &FIXED_EPS {
            for lambda in 1..=lab.shape.cutoff as i64 {
                let lf = lambda as f64;
                let n = -lambda;
                let layer = (32.0 * lf * eps).ceil() as usize;
                let grid = TimeGrid::new(eps, layer.max(lab.config.m_t))?;
                let beta = unit_datum(lab, n)?;
                let q = CylinderMap::q_op(&beta, &grid);
                let far = q.far_end_boundary();
                let defect = beta
                    .combine()
                    .sub(&far.combine())?
                    .sobolev_norm(SobolevOrder::Half)
                    .powi(2);
                let exact_defect = lf * (1.0 - (-eps * lf).exp()).powi(2);
                let rhs = lf * (1.0 - (-2.0 * eps * lf).exp());
                defect_err = defect_err.max((defect - exact_defect).abs());
                min_margin = min_margin.min(rhs - defect);

                let series = q.series(n, 0);
                let mut dq = vec![Complex64::new(0.0, 0.0); series.len()];
                grid.derivative(&series, &mut dq);
                let density: Vec<f64> = dq.iter().map(|v| v.norm_sqr()).collect();
                let energy = 2.0 * grid.integrate(&density);
                energy_err = energy_err.max(rel_err(energy, rhs, 1e-300));
            }
        }
        rec.push(
            Record::upper("c01.boundary_defect_closed_form", anchor::APS_DEFECT, defect_err, 1e-10)
                .criterion(1),
        );
        rec.push(
            Record::lower("c01.boundary_defect_margin", anchor::APS_DEFECT, min_margin, 0.0).criterion(1),
        );
        rec.push(Record::upper("c01.q_energy_closed_form", anchor::Q_ENERGY, energy_err, 1e-6).criterion(1));
        Ok(())
    });
}

/// `D(P g) = g` for smooth random `g` on refined grids.
pub fn criterion_2(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c02.right_inverse", anchor::RIGHT_INVERSE, Some(2), |rec| {
        rec.hit("apply_D");
        rec.hit("p_op");
        rec.hit("aps_boundary");
        let refined = 4 * lab.config.m_t;
        let mut rng = lab.rng(21);
        let (mut worst, mut boundary): (f64, f64) = (0.0, 0.0);
        let count = lab.config.samples.right_inverse;
        for &eps in &lab.config.eps_list {
            let grid = TimeGrid::new(eps, refined)?;
            for _ in 0..count {
                let decay = rng.random_range(0.5..2.0);
                let g = CylinderMap::random_smooth(lab.shape, &grid, 3, decay, &mut rng);
                let u = g.p_op();
                let err = u.apply_d().sub(&g)?.norm(CylinderNorm::L2) / g.norm(CylinderNorm::L2);
                worst = worst.max(err);
                boundary = boundary.max(u.aps_boundary().norm());
            }
        }
        rec.push(
            Record::upper("c02.right_inverse", anchor::RIGHT_INVERSE, worst, 1e-6)
                .criterion(2)
                .detail("M_t", refined as f64)
                .detail("fields_per_eps", count as f64),
        );
        rec.push(Record::upper("c02.aps_boundary_of_p", anchor::RIGHT_INVERSE, boundary, 1e-10).criterion(2));
        Ok(())
    });
}

/// Least-squares slope of `log y` against `log(1/ε)`.
fn growth_slope(eps: &[f64], values: &[f64]) -> f64 {
    let xs: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
    let ys: Vec<f64> = values.iter().map(|v| v.ln()).collect();
    let n = xs.len() as f64;
    let (mx, my) = (xs.iter().sum::<f64>() / n, ys.iter().sum::<f64>() / n);
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        0.0
    } else {
        sxy / sxx
    }
}

fn spread(values: &[f64]) -> f64 {
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    max / min
}

/// Sup over modes of the per-mode norms, on the full window and on `|n| ≤ N`.
struct SweepPoint {
    p: f64,
    q: f64,
    restriction: f64,
    p_trunc: f64,
    q_trunc: f64,
    restriction_trunc: f64,
}

fn sweep_point(lab: &Lab, eps: f64, window: &[i64]) -> actionlab::Result<SweepPoint> {
    let cutoff = lab.shape.cutoff as i64;
    let mut out = SweepPoint {
        p: 0.0,
        q: 0.0,
        restriction: 0.0,
        p_trunc: 0.0,
        q_trunc: 0.0,
        restriction_trunc: 0.0,
    };
    for &n in window {
        let grid = modal::resolved_grid(n, eps, lab.config.m_t)?;
        let (p, q, r) = (
            modal::p_norm(n, &grid),
            modal::q_norm(n, &grid),
            modal::restriction_norm(n, &grid),
        );
        out.p = out.p.max(p);
        out.q = out.q.max(q);
        out.restriction = out.restriction.max(r);
        if n.abs() <= cutoff {
            out.p_trunc = out.p_trunc.max(p);
            out.q_trunc = out.q_trunc.max(q);
            out.restriction_trunc = out.restriction_trunc.max(r);
        }
    }
    Ok(out)
}

/// Operator norms of `P_ε`, `Q_ε` and the restriction over the ε sweep.
pub fn criterion_3(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c03.uniformity", anchor::UNIFORM, Some(3), |rec| {
        let mut eps: Vec<f64> = lab.config.eps_list.clone();
        eps.sort_by(|a, b| b.total_cmp(a));
        let eps_min = *eps.last().expect("validated nonempty");
        let cutoff = lab.shape.cutoff;
        let max_mode = cutoff.max((4.0 / eps_min).ceil() as usize);
        let window = modal::mode_window(cutoff, max_mode, lab.config.samples.spectral_window);
        let points = eps
            .iter()
            .map(|&e| sweep_point(lab, e, &window))
            .collect::<actionlab::Result<Vec<_>>>()?;

        let mut curve = Curve::new(&[
            "eps",
            "p_norm",
            "q_norm",
            "restriction_norm",
            "p_norm_truncated",
            "q_norm_truncated",
            "restriction_norm_truncated",
        ]);
        for (e, p) in eps.iter().zip(&points) {
            curve.push(vec![*e, p.p, p.q, p.restriction, p.p_trunc, p.q_trunc, p.restriction_trunc]);
        }
        rec.curve("operator_norms", curve);

        type Pick = fn(&SweepPoint) -> f64;
        let families: [(&str, Pick, bool); 6] = [
            ("p", |s| s.p, true),
            ("q", |s| s.q, true),
            ("restriction", |s| s.restriction, true),
            ("p_truncated", |s| s.p_trunc, false),
            ("q_truncated", |s| s.q_trunc, false),
            ("restriction_truncated", |s| s.restriction_trunc, false),
        ];
        for (name, pick, spectral) in families {
            let values: Vec<f64> = points.iter().map(pick).collect();
            if spectral {
                rec.push(
                    Record::upper(format!("c03.{name}_spread"), anchor::UNIFORM, spread(&values), 4.0)
                        .criterion(3)
                        .detail("max_mode", max_mode as f64)
                        .detail("at_eps_min", *values.last().unwrap())
                        .detail("at_eps_max", values[0]),
                );
            }
            rec.push(
                Record::upper(
                    format!("c03.{name}_growth_slope"),
                    anchor::UNIFORM,
                    growth_slope(&eps, &values),
                    0.05,
                )
                .criterion(3),
            );
        }
        Ok(())
    });
}

/// `∫|∇f|²` in the coordinates `x = θ/2π ∈ [0,1]`, `t ∈ [0, ε]`.
fn dirichlet(f: &CylinderMap) -> f64 {
    let ft = f.time_derivative();
    let two_pi_sq = (2.0 * std::f64::consts::PI).powi(2);
    let density: Vec<f64> = (0..f.grid().nodes())
        .map(|j| {
            let u = f.node(j);
            let theta = u.sobolev_norm(SobolevOrder::One).powi(2) - u.sobolev_norm(SobolevOrder::Zero).powi(2);
            ft.node(j).sobolev_norm(SobolevOrder::Zero).powi(2) + two_pi_sq * theta
        })
        .collect();
    f.grid().integrate(&density)
}

/// `∫|f|⁴ ≤ ε(∫|∇f|²)²` for fields vanishing on one end.
pub fn criterion_4(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c04.sobolev_l4", anchor::SOBOLEV_L4, Some(4), |rec| {
        rec.hit("cyl_norm");
        let mut rng = lab.rng(41);
        let count = lab.config.samples.random_fields;
        for &eps in &FIXED_EPS {
            let grid = lab.grid(eps)?;
            let mut worst: f64 = 0.0;
            for k in 0..count {
                let decay = rng.random_range(0.5..2.5);
                let raw = CylinderMap::random_smooth(lab.shape, &grid, 3, decay, &mut rng);
                let half_pi = 0.5 * std::f64::consts::PI / eps;
                let f = if k % 2 == 0 {
                    raw.windowed(|t| (half_pi * t).sin())
                } else {
                    raw.windowed(|t| (half_pi * (eps - t)).sin())
                };
                let quartic = f.norm(CylinderNorm::L4).powi(4);
                worst = worst.max(quartic / (eps * dirichlet(&f).powi(2)));
            }
            rec.push(
                Record::upper(format!("c04.sobolev_l4_eps_{eps}"), anchor::SOBOLEV_L4, worst, 1.0)
                    .criterion(4)
                    .detail("fields", count as f64),
            );
        }
        Ok(())
    });
}

fn q_boundary(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    let mut rng = lab.rng(42);
    let mut worst: f64 = 0.0;
    for &eps in &lab.config.eps_list {
        let grid = lab.grid(eps)?;
        let b = Loop::random(lab.shape, 1.0, &mut rng);
        let beta = BoundaryData::decompose(&b);
        let back = CylinderMap::q_op(&beta, &grid).aps_boundary();
        worst = worst.max(back.combine().max_abs_diff(&b)?);
    }
    rec.push(Record::upper("cylinder.q_boundary", anchor::APS_Q, worst, 1e-14));
    Ok(())
}

/// `‖Q_ε(β)‖_{L⁴}` along `ε = 2^{−k}`, `k = 0..10`. Each APS sector alone is
/// a restriction of one fixed decaying field, hence strictly monotone; the
/// full field is only asymptotically so, decaying like `ε^{1/4}`.
fn l4_smallness(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    let mut rng = lab.rng(43);
    let (mut sector_monotone, mut full_nonmonotone) = (true, 0usize);
    let (mut bound_ratio, mut decay_ratio, mut slope_err) = (0.0f64, 0.0f64, 0.0f64);
    let sweep = |beta: &BoundaryData| -> actionlab::Result<Vec<f64>> {
        (0..=10)
            .map(|k| Ok(CylinderMap::q_op(beta, &lab.grid(2f64.powi(-k))?).norm(CylinderNorm::L4)))
            .collect()
    };
    let decreasing = |q: &[f64]| q.windows(2).all(|w| w[1] < w[0]);
    for _ in 0..10 {
        let b = Loop::random(lab.shape, 1.5, &mut rng);
        let l1: f64 = b.coeffs().iter().map(|z| z.norm()).sum();
        let full = sweep(&BoundaryData::decompose(&b))?;
        for sector in [Sector::Plus, Sector::Minus] {
            let part = sweep(&BoundaryData::decompose(&b.aps_project(sector)))?;
            sector_monotone &= decreasing(&part);
        }
        if !decreasing(&full) {
            full_nonmonotone += 1;
        }
        for (k, q) in full.iter().enumerate() {
            bound_ratio = bound_ratio.max(q / (2f64.powi(-(k as i32)).powf(0.25) * l1));
        }
        decay_ratio = decay_ratio.max(full[10] / full[0]);
        slope_err = slope_err.max(((full[9] / full[10]).log2() - 0.25).abs());
    }
    rec.push(
        Record::holds("cylinder.l4_q_sector_monotone", anchor::L4_SMALL, sector_monotone)
            .detail("full_field_nonmonotone", full_nonmonotone as f64),
    );
    rec.push(
        Record::upper("cylinder.l4_q_quarter_power_bound", anchor::L4_SMALL, bound_ratio, 1.0 + 1e-12)
            .detail("final_over_initial", decay_ratio),
    );
    rec.push(Record::upper("cylinder.l4_q_tail_rate", anchor::L4_SMALL, slope_err, 0.025));
    Ok(())
}

fn mixed_l4(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    let mut rng = lab.rng(44);
    let mut per_eps = Vec::new();
    for &eps in &lab.config.eps_list {
        let grid = lab.grid(eps)?;
        let mut best: f64 = 0.0;
        for _ in 0..50 {
            let decay = rng.random_range(0.5..2.0);
            let beta = BoundaryData::decompose(&Loop::random(lab.shape, decay, &mut rng));
            let v = CylinderMap::random_smooth(lab.shape, &grid, 3, decay, &mut rng);
            let u = CylinderMap::q_op(&beta, &grid).add(&v.p_op())?;
            best = best.max(u.norm(CylinderNorm::L4) / (beta.norm() + v.norm(CylinderNorm::L2)));
        }
        per_eps.push(best);
    }
    let max = per_eps.iter().cloned().fold(0.0, f64::max);
    rec.push(
        Record::upper("cylinder.mixed_l4_bound", anchor::MIXED_L4, max, 2.0 * lab.sobolev_constant)
            .detail("C", lab.sobolev_constant),
    );
    rec.push(Record::upper("cylinder.mixed_l4_spread", anchor::MIXED_L4, spread(&per_eps), 4.0));
    Ok(())
}

fn nonlinear_lipschitz(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    let model = lab.model();
    if model.variant() != Variant::Bump {
        return Ok(());
    }
    let c = model.k_constant()?;
    let grid = lab.grid(0.1)?;
    let mut rng = lab.rng(45);
    let mut worst: f64 = 0.0;
    for _ in 0..lab.config.samples.lipschitz_pairs {
        let decay = rng.random_range(1.0..2.5);
        let scale = rng.random_range(0.2..1.5);
        let a = CylinderMap::random_smooth(lab.shape, &grid, 2, decay, &mut rng).scaled(scale);
        let b = CylinderMap::random_smooth(lab.shape, &grid, 2, decay, &mut rng).scaled(scale);
        let lhs = a.grad_h(model).sub(&b.grad_h(model))?.norm(CylinderNorm::L2);
        let rhs = 2.0
            * c
            * (a.norm(CylinderNorm::L4) + b.norm(CylinderNorm::L4))
            * a.sub(&b)?.norm(CylinderNorm::L4);
        worst = worst.max(lhs / rhs);
    }
    rec.push(
        Record::upper("cylinder.nonlinear_lipschitz", anchor::NONLINEAR_LIPSCHITZ, worst, 1.0)
            .detail("C", c),
    );
    Ok(())
}

fn orbit_energy(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("energy");
    let model = lab.model();
    if model.variant() != Variant::Bump {
        return Ok(());
    }
    let orbit = radial_orbit_oracle(model, lab.shape, 1)?;
    let u = CylinderMap::constant(&orbit.orbit, &lab.grid(0.1)?);
    rec.push(Record::upper("cylinder.orbit_energy", anchor::CYLINDER_ENERGY, u.energy(model), 1e-8));
    Ok(())
}
