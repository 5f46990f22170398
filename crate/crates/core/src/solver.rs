//! Picard solver for `∂_t u + J∂_θ u + ∇H(u) = g` on short cylinders with
//! mixed APS data, and the exponential integrator for the upward flow.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::cylinder::{BoundaryData, CylinderMap, CylinderNorm};
use crate::error::{LabError, Result};
use crate::hamiltonian::HamiltonianModel;
use crate::loopspace::{Loop, Shape, SobolevOrder};
use crate::timegrid::TimeGrid;

/// Flow steps larger than `FLOW_CFL / N` are rejected.
pub const FLOW_CFL: f64 = 0.1;
/// L² norm beyond which the flow is declared blown up.
pub const BLOWUP_NORM: f64 = 1e8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Sobolev–L⁴ constant `C`; iterates must stay in the L² ball of radius `1/(8C)`.
    pub sobolev_constant: f64,
}

impl SolverOptions {
    pub fn ball_radius(&self) -> f64 {
        1.0 / (8.0 * self.sobolev_constant)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SolveResult {
    #[serde(skip)]
    pub u: CylinderMap,
    #[serde(skip)]
    pub v: CylinderMap,
    pub iterations: usize,
    pub contraction_ratio: f64,
    pub residual: f64,
    pub energy: f64,
    pub action_in: f64,
    pub action_out: f64,
    pub v_norm: f64,
    pub ball_radius: f64,
}

impl SolveResult {
    /// `u(0, ·)`.
    pub fn rest_0(&self) -> Loop {
        self.u.first()
    }

    /// `u(T, ·)`.
    pub fn rest_end(&self) -> Loop {
        self.u.last()
    }

    /// `|ΔCSD_H − E(u)|`.
    pub fn energy_defect(&self) -> f64 {
        ((self.action_out - self.action_in) - self.energy).abs()
    }
}

/// Fixed point of `v ↦ g − ∇H(Q(β) + P(v))` from `v₀ = 0`.
pub fn picard_solve(
    model: &HamiltonianModel,
    beta: &BoundaryData,
    g: &CylinderMap,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let v0 = CylinderMap::zeros(g.shape(), g.grid());
    picard_solve_from(model, beta, g, &v0, opts)
}

pub fn picard_solve_from(
    model: &HamiltonianModel,
    beta: &BoundaryData,
    g: &CylinderMap,
    v0: &CylinderMap,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    beta.shape().check_same(&g.shape())?;
    if !(opts.tol > 0.0 && opts.sobolev_constant > 0.0 && opts.max_iter > 0) {
        return Err(LabError::InvalidParameter(
            "solver tolerance, constant and iteration budget must be positive".into(),
        ));
    }
    let radius = opts.ball_radius();
    let q = CylinderMap::q_op(beta, g.grid());
    let mut v = v0.clone();
    let mut prev_step: Option<f64> = None;
    let mut growing = 0;
    let mut max_ratio: f64 = 0.0;
    let mut last_step = f64::INFINITY;
    for k in 1..=opts.max_iter {
        let u = q.add(&v.p_op())?;
        let next = g.sub(&u.grad_h(model))?;
        let step = next.sub(&v)?.norm(CylinderNorm::L2);
        let norm = next.norm(CylinderNorm::L2);
        if !norm.is_finite() || norm > radius {
            return Err(LabError::BallExit {
                iterations: k,
                norm,
                radius,
            });
        }
        if let Some(p) = prev_step.filter(|p| *p > 0.0) {
            let ratio = step / p;
            max_ratio = max_ratio.max(ratio);
            if ratio >= 1.0 {
                growing += 1;
                if growing >= 3 {
                    return Err(LabError::ContractionFailure {
                        iterations: k,
                        ratio,
                    });
                }
            } else {
                growing = 0;
            }
        }
        prev_step = Some(step);
        last_step = step;
        v = next;
        if step <= opts.tol {
            return Ok(finish(model, g, &q, v, k, max_ratio, radius));
        }
    }
    Err(LabError::MaxIter {
        iterations: opts.max_iter,
        last_step,
    })
}

fn finish(
    model: &HamiltonianModel,
    g: &CylinderMap,
    q: &CylinderMap,
    v: CylinderMap,
    iterations: usize,
    contraction_ratio: f64,
    ball_radius: f64,
) -> SolveResult {
    let u = q.add(&v.p_op()).expect("same grid");
    let residual = u
        .apply_d()
        .add(&u.grad_h(model))
        .and_then(|r| r.sub(g))
        .expect("same grid")
        .norm(CylinderNorm::L2);
    let grid = u.shape().theta_grid();
    let action_in = model.action(&u.first(), grid).expect("4N grid");
    let action_out = model.action(&u.last(), grid).expect("4N grid");
    SolveResult {
        energy: u.energy(model),
        v_norm: v.norm(CylinderNorm::L2),
        u,
        v,
        iterations,
        contraction_ratio,
        residual,
        action_in,
        action_out,
        ball_radius,
    }
}

/// Small-energy solution of the unforced equation whose APS data is read
/// off the loop `b`.
pub fn collar_solve(
    model: &HamiltonianModel,
    b: &Loop,
    grid: &TimeGrid,
    opts: &SolverOptions,
) -> Result<SolveResult> {
    let beta = BoundaryData::decompose(b);
    let g = CylinderMap::zeros(b.shape(), grid);
    picard_solve(model, &beta, &g, opts)
}

/// `‖v*(β+δβ) − v*(β)‖_{L²} / ‖δβ‖_{L²_{1/2}}` for the unforced problem.
pub fn h_eps_sensitivity(
    model: &HamiltonianModel,
    beta: &BoundaryData,
    delta: &BoundaryData,
    grid: &TimeGrid,
    opts: &SolverOptions,
) -> Result<f64> {
    let dnorm = delta.norm();
    if dnorm == 0.0 {
        return Err(LabError::InvalidParameter("δβ must be nonzero".into()));
    }
    let g = CylinderMap::zeros(beta.shape(), grid);
    let base = picard_solve(model, beta, &g, opts)?;
    let shifted = BoundaryData {
        beta_plus0: beta.beta_plus0.add(&delta.beta_plus0)?,
        beta_minus_eps: beta.beta_minus_eps.add(&delta.beta_minus_eps)?,
    };
    let moved = picard_solve(model, &shifted, &g, opts)?;
    Ok(moved.v.sub(&base.v)?.norm(CylinderNorm::L2) / dnorm)
}

/// Sampled Sobolev–L⁴ constant: the largest observed value of
/// `‖Q(β) + P(v)‖_{L⁴} / (‖β‖_{L²_{1/2}} + ‖v‖_{L²})` and `‖f‖_{L⁴} / ‖f‖_{L²_1}`
/// over random data on cylinders of the given lengths.
pub fn estimate_sobolev_constant(
    shape: Shape,
    lengths: &[f64],
    intervals: usize,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let per_length: Vec<Result<f64>> = lengths
        .par_iter()
        .enumerate()
        .map(|(k, &length)| {
            let grid = TimeGrid::new(length, intervals)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0x5eed_0000 + k as u64));
            let mut best: f64 = 0.0;
            for _ in 0..samples {
                let decay = rng.random_range(0.5..2.0);
                let beta = BoundaryData::decompose(&Loop::random(shape, decay, &mut rng));
                let scale = rng.random_range(0.0..2.0);
                let v = CylinderMap::random_smooth(shape, &grid, 3, decay, &mut rng).scaled(scale);
                let u = CylinderMap::q_op(&beta, &grid).add(&v.p_op())?;
                let denom = beta.norm() + v.norm(CylinderNorm::L2);
                best = best.max(u.norm(CylinderNorm::L4) / denom);
                let f = CylinderMap::random_smooth(shape, &grid, 3, decay, &mut rng);
                best = best.max(f.norm(CylinderNorm::L4) / f.norm(CylinderNorm::L2_1));
            }
            Ok(best)
        })
        .collect();
    let mut best: f64 = 0.0;
    for r in per_length {
        best = best.max(r?);
    }
    Ok(best)
}

fn phi1(z: f64) -> f64 {
    if z.abs() < 1e-5 {
        1.0 + z * (0.5 + z / 6.0)
    } else {
        z.exp_m1() / z
    }
}

fn check_flow_step(gamma: &Loop, dt: f64) -> Result<()> {
    let limit = FLOW_CFL / gamma.cutoff() as f64;
    if !(dt > 0.0 && dt <= limit * (1.0 + 1e-12)) {
        return Err(LabError::InvalidParameter(format!(
            "flow step {dt} outside (0, {limit}]"
        )));
    }
    Ok(())
}

fn etd1(gamma: &Loop, grad_h: &Loop, dt: f64) -> Loop {
    let mut out = gamma.clone();
    for ((n, c), (_, g)) in out.modes_mut().zip(grad_h.modes()) {
        let z = n as f64 * dt;
        let (growth, weight) = (z.exp(), phi1(z) * dt);
        for (a, b) in c.iter_mut().zip(g) {
            *a = *a * growth - b * weight;
        }
    }
    out
}

/// One exponential-Euler step of `∂_t γ = ∇CSD_H(γ)`.
pub fn flow_step(model: &HamiltonianModel, gamma: &Loop, dt: f64) -> Result<Loop> {
    check_flow_step(gamma, dt)?;
    let gh = model.grad_h_loop(gamma, gamma.shape().theta_grid())?;
    let next = etd1(gamma, &gh, dt);
    let norm = next.sobolev_norm(SobolevOrder::Zero);
    if !norm.is_finite() || norm > BLOWUP_NORM {
        return Err(LabError::Blowup { time: dt, norm });
    }
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub actions: Vec<f64>,
    pub cumulative_energy: Vec<f64>,
    pub norms: Vec<f64>,
    pub gradient_norms: Vec<f64>,
    #[serde(rename = "final")]
    pub final_loop: Loop,
}

impl FlowTrace {
    /// Largest `|(actions[k] − actions[0]) − cumulative_energy[k]|`.
    pub fn identity_defect(&self) -> f64 {
        self.actions
            .iter()
            .zip(&self.cumulative_energy)
            .map(|(a, e)| ((a - self.actions[0]) - e).abs())
            .fold(0.0, f64::max)
    }

    pub fn total_energy(&self) -> f64 {
        *self.cumulative_energy.last().unwrap_or(&0.0)
    }

    /// `t,action,cumulative_energy,norm`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["t", "action", "cumulative_energy", "norm"])?;
        for k in 0..self.times.len() {
            w.serialize((
                self.times[k],
                self.actions[k],
                self.cumulative_energy[k],
                self.norms[k],
            ))?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Integrates the upward flow to time `t_end` with steps of at most `dt`.
///
/// Within a step the integrator follows `ċ = Lc − ∇H(c_k)` exactly, so the
/// path is piecewise exponential. The recorded energy is
/// `½∫(|u_t|² + |∇CSD_H(u)|²)` along that path: `∫|u_t|²` in closed form per
/// mode, and the correction `∇CSD_H(u) − u_t` (zero at the step start,
/// linear to leading order) by quadrature from its value at the step end.
pub fn flow_trajectory(
    model: &HamiltonianModel,
    gamma: &Loop,
    t_end: f64,
    dt: f64,
) -> Result<FlowTrace> {
    check_flow_step(gamma, dt)?;
    if !(t_end.is_finite() && t_end >= 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "flow time must be nonnegative, got {t_end}"
        )));
    }
    let grid = gamma.shape().theta_grid();
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let step = if steps > 0 { t_end / steps as f64 } else { dt };

    let mut current = gamma.clone();
    let mut gh = model.grad_h_loop(&current, grid)?;
    let mut grad = gradient_from(&current, &gh);
    let mut trace = FlowTrace {
        times: vec![0.0],
        actions: vec![model.action(&current, grid)?],
        cumulative_energy: vec![0.0],
        norms: vec![current.sobolev_norm(SobolevOrder::Zero)],
        gradient_norms: vec![grad.sobolev_norm(SobolevOrder::Zero)],
        final_loop: current.clone(),
    };
    let mut energy = 0.0;
    for k in 1..=steps {
        let next = etd1(&current, &gh, step);
        let time = step * k as f64;
        let norm = next.sobolev_norm(SobolevOrder::Zero);
        if !norm.is_finite() || norm > BLOWUP_NORM {
            return Err(LabError::Blowup { time, norm });
        }
        let next_gh = model.grad_h_loop(&next, grid)?;
        let next_grad = gradient_from(&next, &next_gh);

        // u_t(s) = e^{ns}·∇CSD_n(γ_k) on mode n.
        let mut velocity_sq = 0.0;
        let mut cross = 0.0;
        let mut correction_sq = 0.0;
        for ((n, g0), (_, g1)) in grad.modes().zip(next_grad.modes()) {
            let z = n as f64 * step;
            let growth = z.exp();
            let weight = step * phi1(2.0 * z);
            for (a, b) in g0.iter().zip(g1) {
                velocity_sq += a.norm_sqr() * weight;
                let end_velocity = a * growth;
                let correction = b - end_velocity;
                cross += (correction.conj() * end_velocity).re;
                correction_sq += correction.norm_sqr();
            }
        }
        energy += velocity_sq + 0.5 * step * cross + step * correction_sq / 6.0;

        trace.times.push(time);
        trace.actions.push(model.action(&next, grid)?);
        trace.cumulative_energy.push(energy);
        trace.norms.push(norm);
        trace.gradient_norms.push(next_grad.sobolev_norm(SobolevOrder::Zero));
        current = next;
        gh = next_gh;
        grad = next_grad;
    }
    trace.final_loop = current;
    Ok(trace)
}

fn gradient_from(gamma: &Loop, grad_h: &Loop) -> Loop {
    let mut out = grad_h.clone();
    for ((n, o), (_, c)) in out.modes_mut().zip(gamma.modes()) {
        for (p, q) in o.iter_mut().zip(c) {
            *p = q * n as f64 - *p;
        }
    }
    out
}

/// Flows every point for time `t`; failures are kept per point.
pub fn gf_pushforward(
    model: &HamiltonianModel,
    points: &[Loop],
    t: f64,
    dt: f64,
) -> Vec<Result<FlowTrace>> {
    points
        .par_iter()
        .map(|p| flow_trajectory(model, p, t, dt))
        .collect()
}

/// Convenience for tests and the CLI: zero forcing on the grid of `beta`.
pub fn zero_forcing(shape: Shape, grid: &TimeGrid) -> CylinderMap {
    CylinderMap::zeros(shape, grid)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::Variant;
    use num_complex::Complex64;

    fn complex(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn opts() -> SolverOptions {
        SolverOptions {
            tol: 1e-12,
            max_iter: 200,
            sobolev_constant: 1.0,
        }
    }

    #[test]
    fn zero_data_gives_zero_solution_in_one_iteration() {
        let model = HamiltonianModel::default();
        let s = Shape::new(1, 8).unwrap();
        let grid = TimeGrid::new(0.1, 32).unwrap();
        let res = picard_solve(
            &model,
            &BoundaryData::zeros(s),
            &zero_forcing(s, &grid),
            &opts(),
        )
        .unwrap();
        assert_eq!(res.iterations, 1);
        assert_eq!(res.u.norm(CylinderNorm::L2), 0.0);
        assert_eq!(res.contraction_ratio, 0.0);
    }

    #[test]
    fn large_data_is_detected() {
        let model = HamiltonianModel::default();
        let s = Shape::new(1, 8).unwrap();
        let grid = TimeGrid::new(0.5, 32).unwrap();
        let b = Loop::single_mode(s, -1, 0, complex(1e3, 0.0)).unwrap();
        let err = collar_solve(&model, &b, &grid, &opts()).unwrap_err();
        assert!(matches!(
            err,
            LabError::BallExit { .. } | LabError::ContractionFailure { .. }
        ));
    }

    #[test]
    fn small_data_in_active_region_converges() {
        let model = HamiltonianModel::new(0.1, 0.0025, 0.04, Variant::Bump).unwrap();
        let s = Shape::new(1, 8).unwrap();
        let grid = TimeGrid::new(0.05, 64).unwrap();
        let b = Loop::single_mode(s, -1, 0, complex(0.1, 0.0)).unwrap();
        let res = collar_solve(&model, &b, &grid, &opts()).unwrap();
        assert!(res.contraction_ratio < 0.5);
        assert!(res.residual < 1e-8);
        assert!(res.v_norm > 0.0);
        assert!(res.energy_defect() <= 1e-5 * (1.0 + res.energy));
    }

    #[test]
    fn linear_flow_is_exact_and_semigroup() {
        let model = HamiltonianModel::default();
        let s = Shape::new(1, 8).unwrap();
        let g = Loop::single_mode(s, 3, 0, complex(0.01, 0.02)).unwrap();
        let dt = 0.005;
        let one = flow_step(&model, &g, dt).unwrap();
        assert!((one.mode(3)[0] - g.mode(3)[0] * (3.0 * dt).exp()).norm() < 1e-17);
        let two = flow_step(&model, &one, dt).unwrap();
        let double = flow_step(&model, &g, 2.0 * dt).unwrap();
        assert!(two.approx_eq(&double, 1e-17));
        assert!(flow_step(&model, &g, 0.02).is_err());
    }

    #[test]
    fn zero_time_trajectory_is_identity() {
        let model = HamiltonianModel::default();
        let s = Shape::new(1, 8).unwrap();
        let g = Loop::single_mode(s, 1, 0, complex(0.5, 0.0)).unwrap();
        let out = gf_pushforward(&model, std::slice::from_ref(&g), 0.0, 0.01);
        let trace = out[0].as_ref().unwrap();
        assert_eq!(trace.final_loop, g);
        assert_eq!(trace.times, vec![0.0]);
    }

    #[test]
    fn generic_data_blows_up_cleanly() {
        let model = HamiltonianModel::default();
        let s = Shape::new(1, 8).unwrap();
        let g = Loop::single_mode(s, 8, 0, complex(1.0, 0.0)).unwrap();
        let err = flow_trajectory(&model, &g, 5.0, 0.01).unwrap_err();
        assert!(matches!(err, LabError::Blowup { time, .. } if time > 0.0 && time < 5.0));
    }

    #[test]
    fn flow_csv_header() {
        let model = HamiltonianModel::default();
        let s = Shape::new(1, 4).unwrap();
        let g = Loop::single_mode(s, 1, 0, complex(0.2, 0.0)).unwrap();
        let trace = flow_trajectory(&model, &g, 0.05, 0.025).unwrap();
        let mut buf = Vec::new();
        trace.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,action,cumulative_energy,norm\n"));
        assert_eq!(text.lines().count(), 4);
    }
}
