//! The cycles `Γ_α` (sphere in the plus space) and `Σ_τ` (minus ball plus a
//! segment along `e⁺`), the perturbation map, the radial orbit oracle and
//! the flow-plus-Newton critical point finder.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{LabError, Result};
use crate::hamiltonian::{HamiltonianModel, Variant};
use crate::loopspace::{Loop, Samples, Sector, Shape, SobolevOrder};
use crate::solver::FLOW_CFL;

/// Which cycle a [`CycleSampler`] draws from.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum CycleKind {
    Gamma { alpha: f64 },
    Sigma { tau: f64, e_plus: Loop },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CycleSampler {
    pub kind: CycleKind,
    pub shape: Shape,
    pub seed: u64,
}

impl CycleSampler {
    pub fn sample(&self, count: usize, boundary_only: bool) -> Result<Vec<Loop>> {
        match &self.kind {
            CycleKind::Gamma { alpha } => sample_gamma(self.shape, *alpha, count, self.seed),
            CycleKind::Sigma { tau, e_plus } => {
                sample_sigma(*tau, e_plus, count, self.seed, boundary_only)
            }
        }
    }
}

/// Default `e⁺`: the unit loop `e^{iθ}` in the first coordinate.
pub fn e_plus(shape: Shape) -> Loop {
    Loop::single_mode(shape, 1, 0, Complex64::new(1.0, 0.0)).expect("N >= 1")
}

fn half_norm(g: &Loop) -> f64 {
    g.sobolev_norm(SobolevOrder::Half)
}

fn random_direction<R: Rng + ?Sized>(shape: Shape, sector: Sector, rng: &mut R) -> Loop {
    loop {
        let g = Loop::random(shape, 1.0, rng).project(sector);
        let n = half_norm(&g);
        if n > 0.0 {
            return g.scaled(1.0 / n);
        }
    }
}

/// Random points of `Γ_α`: plus-mode Gaussian loops rescaled to `‖·‖_{L²_{1/2}} = α`.
pub fn sample_gamma(shape: Shape, alpha: f64, count: usize, seed: u64) -> Result<Vec<Loop>> {
    if !(alpha.is_finite() && alpha >= 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "α must be nonnegative, got {alpha}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| random_direction(shape, Sector::Plus, &mut rng).scaled(alpha))
        .collect())
}

/// The point `γ⁻ + s·e⁺` of `Σ_τ`.
pub fn sigma_point(minus: &Loop, s: f64, e_plus: &Loop) -> Result<Loop> {
    let mut out = minus.clone();
    out.axpy(s, e_plus)?;
    Ok(out)
}

/// Random points of `Σ_τ`; with `boundary_only` each point lies on one of the
/// faces `‖γ⁻‖ = τ`, `s = 0`, `s = τ`.
pub fn sample_sigma(
    tau: f64,
    e_plus: &Loop,
    count: usize,
    seed: u64,
    boundary_only: bool,
) -> Result<Vec<Loop>> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(LabError::InvalidParameter(format!(
            "τ must be positive, got {tau}"
        )));
    }
    let shape = e_plus.shape();
    if e_plus.project(Sector::Minus).sobolev_norm(SobolevOrder::Zero) != 0.0
        || (half_norm(e_plus) - 1.0).abs() > 1e-12
    {
        return Err(LabError::InvalidParameter(
            "e⁺ must be a unit plus-mode loop".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let dir = random_direction(shape, Sector::Minus, &mut rng);
        let (radius, s) = if boundary_only {
            match rng.random_range(0..3) {
                0 => (tau, rng.random_range(0.0..=tau)),
                1 => (tau * rng.random::<f64>(), 0.0),
                _ => (tau * rng.random::<f64>(), tau),
            }
        } else {
            (tau * rng.random::<f64>(), rng.random_range(0.0..=tau))
        };
        out.push(sigma_point(&dir.scaled(radius), s, e_plus)?);
    }
    Ok(out)
}

/// Minimum of the action over `Γ_α`, estimated by projected gradient descent
/// on the sphere (in the `L²_{1/2}` metric) from `samples` random starts plus
/// the pure-mode starts `α·e^{ikθ}/√k`.
pub fn estimate_beta(
    model: &HamiltonianModel,
    shape: Shape,
    alpha: f64,
    samples: usize,
    descent_steps: usize,
    seed: u64,
) -> Result<f64> {
    if alpha == 0.0 {
        return Ok(0.0);
    }
    let mut starts = sample_gamma(shape, alpha, samples, seed)?;
    for k in 1..=shape.cutoff.min(4) {
        let c = Complex64::new(alpha / (k as f64).sqrt(), 0.0);
        starts.push(Loop::single_mode(shape, k as i64, 0, c)?);
    }
    let minima: Vec<Result<f64>> = starts
        .par_iter()
        .map(|start| sphere_descent(model, start, alpha, descent_steps))
        .collect();
    let mut best = f64::INFINITY;
    for m in minima {
        best = best.min(m?);
    }
    if best <= 0.0 {
        return Err(LabError::NegativeBeta { value: best });
    }
    Ok(best)
}

fn sphere_descent(model: &HamiltonianModel, start: &Loop, alpha: f64, steps: usize) -> Result<f64> {
    let grid = start.shape().theta_grid();
    let mut c = start.clone();
    let mut f = model.action(&c, grid)?;
    let mut eta = 1.0;
    for _ in 0..steps {
        // L²_{1/2} gradient restricted to the plus space, then made tangent.
        let mut g = model.grad_action(&c, grid)?.project(Sector::Plus);
        for (n, m) in g.modes_mut() {
            if n > 0 {
                m.iter_mut().for_each(|z| *z /= n as f64);
            }
        }
        let radial = c.inner(&g, SobolevOrder::Half)? / (alpha * alpha);
        g.axpy(-radial, &c)?;
        let slope = g.inner(&g, SobolevOrder::Half)?;
        if slope <= 1e-28 {
            break;
        }
        let mut accepted = false;
        while eta > 1e-12 {
            let mut trial = c.clone();
            trial.axpy(-eta, &g)?;
            let trial = trial.scaled(alpha / half_norm(&trial));
            let ft = model.action(&trial, grid)?;
            if ft <= f - 1e-4 * eta * slope {
                c = trial;
                f = ft;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            break;
        }
        eta = (eta * 2.0).min(16.0);
    }
    Ok(f)
}

/// `(α, estimate_beta(α))` over a list of radii.
pub fn scan_alpha(
    model: &HamiltonianModel,
    shape: Shape,
    alphas: &[f64],
    samples: usize,
    descent_steps: usize,
    seed: u64,
) -> Vec<(f64, Result<f64>)> {
    alphas
        .iter()
        .map(|&a| (a, estimate_beta(model, shape, a, samples, descent_steps, seed)))
        .collect()
}

/// Largest action over sampled points of `∂Σ_τ`.
pub fn check_sigma_boundary(
    model: &HamiltonianModel,
    tau: f64,
    e_plus: &Loop,
    samples: usize,
    seed: u64,
) -> Result<f64> {
    let grid = e_plus.shape().theta_grid();
    let points = sample_sigma(tau, e_plus, samples, seed, true)?;
    let mut corners = vec![e_plus.scaled(tau), Loop::zeros(e_plus.shape())];
    let zero_mode = Loop::single_mode(e_plus.shape(), 0, 0, Complex64::new(tau, 0.0))?;
    corners.push(sigma_point(&zero_mode, tau, e_plus)?);
    corners.push(zero_mode);
    let actions: Vec<Result<f64>> = points
        .par_iter()
        .chain(corners.par_iter())
        .map(|p| model.action(p, grid))
        .collect();
    let mut worst = f64::NEG_INFINITY;
    for a in actions {
        worst = worst.max(a?);
    }
    Ok(worst)
}

/// Doubles `τ` from `start` until the sampled boundary maximum is `≤ 0`.
pub fn select_tau(
    model: &HamiltonianModel,
    e_plus: &Loop,
    start: f64,
    samples: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let mut tau = start;
    for _ in 0..40 {
        let worst = check_sigma_boundary(model, tau, e_plus, samples, seed)?;
        if worst <= 0.0 {
            return Ok((tau, worst));
        }
        tau *= 2.0;
    }
    Err(LabError::InvalidParameter(format!(
        "no τ up to {tau} makes the action nonpositive on the boundary"
    )))
}

/// `ρ = 1` on `[-1, 1]`, `1/x²` for `|x| ≥ 2`, cubic Hermite blend between.
pub fn rho(x: f64) -> f64 {
    let a = x.abs();
    if a <= 1.0 {
        1.0
    } else if a >= 2.0 {
        1.0 / (a * a)
    } else {
        let t = a - 1.0;
        1.0 + t * t * (-2.0 + 1.25 * t)
    }
}

/// `Σ (1+n²)² |v_n|²`, the squared `L²_2` norm.
pub fn l2_2_norm_sqr(v: &Loop) -> f64 {
    v.modes()
        .map(|(n, c)| {
            let w = 1.0 + (n * n) as f64;
            w * w * c.iter().map(|z| z.norm_sqr()).sum::<f64>()
        })
        .sum()
}

/// `γ + ρ(‖γ‖²_{L²_{1/2}})·v` for `v` in the unit `L²_2` ball.
pub fn perturb(point: &Loop, v: &Loop) -> Result<Loop> {
    let vn = l2_2_norm_sqr(v).sqrt();
    if vn > 1.0 + 1e-12 {
        return Err(LabError::OutsidePerturbationBall { norm: vn });
    }
    let mut out = point.clone();
    out.axpy(rho(half_norm(point).powi(2)), v)?;
    Ok(out)
}

/// Uniform bound on `|CSD_H(perturb(γ, v)) − CSD_H(γ)|`:
/// `(½ + a)·sup_r ρ(r²)(2r + ρ(r²)) + a(s0+s1)/2` with `a = 1+ε`.
pub fn perturbation_bound(model: &HamiltonianModel) -> f64 {
    let a = model.slope();
    let sup = (0..=200_000)
        .map(|i| {
            let r = i as f64 * 1e-4;
            let p = rho(r * r);
            p * (2.0 * r + p)
        })
        .fold(0.0, f64::max);
    let offset = match model.variant() {
        Variant::Bump => 0.5 * a * (model.s0() + model.s1()),
        Variant::PureQuadratic => 0.0,
    };
    // Sampling step 1e-4 on a Lipschitz integrand; pad by the grid error.
    (0.5 + a) * (sup + 1e-3) + offset
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrbitResult {
    #[serde(rename = "loop")]
    pub orbit: Loop,
    pub winding: i64,
    pub radius: f64,
    pub action: f64,
    pub gradient_norm: f64,
    /// Residual evaluations in the Newton phase (including the final check).
    pub newton_iterations: usize,
    pub flow_time: f64,
    /// Converged below the supplied action threshold.
    pub below_beta: bool,
}

impl OrbitResult {
    fn from_loop(
        model: &HamiltonianModel,
        orbit: Loop,
        newton_iterations: usize,
        flow_time: f64,
        beta: Option<f64>,
    ) -> Result<Self> {
        let grid = orbit.shape().theta_grid();
        let action = model.action(&orbit, grid)?;
        let gradient_norm = model
            .grad_action(&orbit, grid)?
            .sobolev_norm(SobolevOrder::Zero);
        let winding = orbit
            .modes()
            .map(|(n, _)| n)
            .max_by(|a, b| orbit.mode_energy(*a).total_cmp(&orbit.mode_energy(*b)))
            .unwrap_or(0);
        let winding = if orbit.sobolev_norm(SobolevOrder::Zero) == 0.0 {
            0
        } else {
            winding
        };
        Ok(Self {
            radius: orbit.sobolev_norm(SobolevOrder::Zero),
            below_beta: beta.is_some_and(|b| action < b),
            orbit,
            winding,
            action,
            gradient_norm,
            newton_iterations,
            flow_time,
        })
    }

    /// `|action − (½k·r² − h(r²))|` for the recorded winding and radius.
    pub fn radial_action_defect(&self, model: &HamiltonianModel) -> f64 {
        let s = self.radius * self.radius;
        (self.action - (0.5 * self.winding as f64 * s - model.h(s))).abs()
    }
}

/// Closed-form orbit `√s·e^{ikθ}e₁` with `2h'(s) = k`.
pub fn radial_orbit_oracle(model: &HamiltonianModel, shape: Shape, k: i64) -> Result<OrbitResult> {
    let s = model.level_root(k)?;
    if k.unsigned_abs() as usize > shape.cutoff {
        return Err(LabError::InvalidParameter(format!(
            "winding {k} exceeds cutoff {}",
            shape.cutoff
        )));
    }
    let orbit = Loop::single_mode(shape, k, 0, Complex64::new(s.sqrt(), 0.0))?;
    let mut out = OrbitResult::from_loop(model, orbit, 0, 0.0, None)?;
    out.action = 0.5 * k as f64 * s - model.h(s);
    out.radius = s.sqrt();
    Ok(out)
}

/// Dense real Jacobian of `γ ↦ ∇CSD_H(γ)` in the ordering
/// `[Re c; Im c]` of the coefficient vector.
pub fn newton_jacobian(model: &HamiltonianModel, gamma: &Loop) -> Result<DMatrix<f64>> {
    let shape = gamma.shape();
    let grid = shape.theta_grid();
    let len = shape.len();
    let x = gamma.sample(grid)?;
    let columns: Vec<Result<Vec<f64>>> = (0..2 * len)
        .into_par_iter()
        .map(|col| {
            let mut e = Loop::zeros(shape);
            e.coeffs_mut()[col % len] = if col < len {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 1.0)
            };
            let de = e.sample(grid)?;
            let mut lin = vec![Complex64::new(0.0, 0.0); de.values().len()];
            for ((xp, dp), out) in x
                .points()
                .zip(de.points())
                .zip(lin.chunks_exact_mut(shape.dim))
            {
                model.grad_h_derivative(xp, dp, out);
            }
            let dn = Loop::synthesize(&Samples::new(shape.dim, lin)?, shape.cutoff)?;
            let mut column = vec![0.0; 2 * len];
            for (q, ((n, ec), (_, dc))) in e.modes().zip(dn.modes()).enumerate() {
                for i in 0..shape.dim {
                    let v = ec[i] * n as f64 - dc[i];
                    column[q * shape.dim + i] = v.re;
                    column[len + q * shape.dim + i] = v.im;
                }
            }
            Ok(column)
        })
        .collect();
    let mut jac = DMatrix::zeros(2 * len, 2 * len);
    for (c, col) in columns.into_iter().enumerate() {
        jac.set_column(c, &DVector::from_vec(col?));
    }
    Ok(jac)
}

fn residual_vector(g: &Loop) -> DVector<f64> {
    let len = g.coeffs().len();
    DVector::from_fn(2 * len, |k, _| {
        if k < len {
            g.coeffs()[k].re
        } else {
            g.coeffs()[k - len].im
        }
    })
}

/// Upward flow until the gradient has passed its peak (or `flow_time`), then
/// damped least-squares Newton on `∇CSD_H = 0`.
pub fn find_critical_point(
    model: &HamiltonianModel,
    seed_loop: &Loop,
    flow_time: f64,
    newton_tol: f64,
    beta: Option<f64>,
) -> Result<OrbitResult> {
    let shape = seed_loop.shape();
    let grid = shape.theta_grid();
    let grad_norm = |g: &Loop| -> Result<f64> {
        Ok(model.grad_action(g, grid)?.sobolev_norm(SobolevOrder::Zero))
    };

    let mut current = seed_loop.clone();
    let mut elapsed = 0.0;
    let initial = grad_norm(&current)?;
    if initial > newton_tol && flow_time > 0.0 {
        let dt = FLOW_CFL / shape.cutoff as f64;
        let mut peak = initial;
        while elapsed < flow_time - 1e-12 {
            let step = dt.min(flow_time - elapsed);
            current = crate::solver::flow_step(model, &current, step).map_err(|e| match e {
                LabError::Blowup { norm, .. } => LabError::Blowup {
                    time: elapsed + step,
                    norm,
                },
                other => other,
            })?;
            elapsed += step;
            let gn = grad_norm(&current)?;
            peak = peak.max(gn);
            if gn < 0.5 * peak {
                break;
            }
        }
    }

    const MAX_NEWTON: usize = 60;
    let mut g = model.grad_action(&current, grid)?;
    let mut res = g.sobolev_norm(SobolevOrder::Zero);
    for it in 1..=MAX_NEWTON {
        if res <= newton_tol {
            return OrbitResult::from_loop(model, current, it, elapsed, beta);
        }
        let jac = newton_jacobian(model, &current)?;
        let svd = jac.svd(true, true);
        let smax = svd.singular_values.max();
        let cutoff = 1e-10 * smax;
        let (u, vt) = (svd.u.as_ref().expect("u"), svd.v_t.as_ref().expect("v_t"));
        let r = residual_vector(&g);
        let mut coeffs = u.transpose() * r;
        for (c, s) in coeffs.iter_mut().zip(svd.singular_values.iter()) {
            *c = if *s > cutoff { -*c / s } else { 0.0 };
        }
        let dx = vt.transpose() * coeffs;
        let len = shape.len();
        let delta: Vec<Complex64> = (0..len).map(|k| Complex64::new(dx[k], dx[len + k])).collect();
        let delta = Loop::from_coeffs(shape, delta)?;

        let mut eta = 1.0;
        let mut improved = None;
        while eta > 1e-10 {
            let mut trial = current.clone();
            trial.axpy(eta, &delta)?;
            let tg = model.grad_action(&trial, grid)?;
            let tr = tg.sobolev_norm(SobolevOrder::Zero);
            if tr < res {
                improved = Some((trial, tg, tr));
                break;
            }
            eta *= 0.5;
        }
        match improved {
            Some((trial, tg, tr)) => {
                current = trial;
                g = tg;
                res = tr;
            }
            None => {
                return Err(LabError::NewtonDivergence {
                    iterations: it,
                    residual: res,
                })
            }
        }
    }
    if res <= newton_tol {
        return OrbitResult::from_loop(model, current, MAX_NEWTON + 1, elapsed, beta);
    }
    Err(LabError::NewtonDivergence {
        iterations: MAX_NEWTON,
        residual: res,
    })
}

/// Singular values of the linearized difference map of `Γ_α` and `Σ_τ` at
/// `α·e⁺`, in coordinates orthonormal for `L²_{1/2}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Transversality {
    pub dimension: usize,
    pub rank: usize,
    pub min_singular: f64,
    pub max_singular: f64,
}

/// Columns `[T_{αe⁺}Γ_α | −T⁻ | −e⁺]`; full rank means the intersection is
/// transverse.
pub fn transversality(e_plus: &Loop) -> Result<Transversality> {
    let shape = e_plus.shape();
    let len = shape.len();
    let basis = |q: usize, imag: bool| -> Loop {
        let mut e = Loop::zeros(shape);
        e.coeffs_mut()[q] = if imag {
            Complex64::new(0.0, 1.0)
        } else {
            Complex64::new(1.0, 0.0)
        };
        e
    };
    let mut cols: Vec<Loop> = Vec::new();
    // Tangent space of the sphere: plus directions orthogonal to e⁺ (the
    // radial direction projects to zero and is dropped).
    let unit = e_plus.scaled(1.0 / half_norm(e_plus));
    for q in 0..len {
        let n = (q / shape.dim) as i64 - shape.cutoff as i64;
        for imag in [false, true] {
            let e = basis(q, imag);
            if n > 0 {
                let mut t = e.clone();
                t.axpy(-unit.inner(&e, SobolevOrder::Half)?, &unit)?;
                if half_norm(&t) > 1e-12 {
                    cols.push(t);
                }
            } else {
                cols.push(e.scaled(-1.0));
            }
        }
    }
    cols.push(e_plus.scaled(-1.0));
    let weights: Vec<f64> = (0..len)
        .map(|q| SobolevOrder::Half.weight((q / shape.dim) as i64 - shape.cutoff as i64).sqrt())
        .collect();
    let mut mat = DMatrix::zeros(2 * len, cols.len());
    for (c, col) in cols.iter().enumerate() {
        for q in 0..len {
            mat[(q, c)] = col.coeffs()[q].re * weights[q];
            mat[(len + q, c)] = col.coeffs()[q].im * weights[q];
        }
    }
    let sv = mat.svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    let rank = sv.iter().filter(|s| **s > 1e-10 * max).count();
    Ok(Transversality {
        dimension: 2 * len,
        rank,
        min_singular: min,
        max_singular: max,
    })
}

/// Result of scanning a parameter grid of `Σ_τ` for points of `Γ_α`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntersectionScan {
    pub samples: usize,
    /// Samples within `tol` of `Γ_α`.
    pub hits: usize,
    /// Largest distance from a hit to `α·e⁺`.
    pub max_hit_offset: f64,
    /// Distance from `α·e⁺` to `Γ_α`.
    pub point_distance: f64,
}

fn distance_to_gamma(p: &Loop, alpha: f64) -> f64 {
    let plus = half_norm(&p.project(Sector::Plus));
    let minus = half_norm(&p.project(Sector::Minus));
    (minus * minus + (plus - alpha).powi(2)).sqrt()
}

/// Scans `γ⁻ + s·e⁺` over `s ∈ {0, τ/m, …, τ} ∪ {α}` and minus radii
/// `{0, τ/m, …, τ}` along random directions.
pub fn intersection_scan(
    alpha: f64,
    tau: f64,
    e_plus: &Loop,
    resolution: usize,
    directions: usize,
    seed: u64,
    tol: f64,
) -> Result<IntersectionScan> {
    let shape = e_plus.shape();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dirs: Vec<Loop> = (0..directions)
        .map(|_| random_direction(shape, Sector::Minus, &mut rng))
        .collect();
    let mut s_values: Vec<f64> = (0..=resolution).map(|i| tau * i as f64 / resolution as f64).collect();
    s_values.push(alpha);
    let target = e_plus.scaled(alpha);
    let mut scan = IntersectionScan {
        samples: 0,
        hits: 0,
        max_hit_offset: 0.0,
        point_distance: distance_to_gamma(&target, alpha),
    };
    for dir in &dirs {
        for i in 0..=resolution {
            let minus = dir.scaled(tau * i as f64 / resolution as f64);
            for &s in &s_values {
                let p = sigma_point(&minus, s, e_plus)?;
                scan.samples += 1;
                if distance_to_gamma(&p, alpha) <= tol {
                    scan.hits += 1;
                    scan.max_hit_offset = scan.max_hit_offset.max(half_norm(&p.sub(&target)?));
                }
            }
        }
    }
    Ok(scan)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape() -> Shape {
        Shape::new(1, 16).unwrap()
    }

    #[test]
    fn gamma_samples_lie_on_sphere_in_plus_space() {
        for g in sample_gamma(shape(), 0.7, 20, 1).unwrap() {
            assert!((half_norm(&g) - 0.7).abs() < 1e-12);
            assert_eq!(g.project(Sector::Minus), Loop::zeros(shape()));
        }
    }

    #[test]
    fn sigma_boundary_samples_lie_on_faces() {
        let ep = e_plus(shape());
        for p in sample_sigma(3.0, &ep, 50, 2, true).unwrap() {
            let minus = half_norm(&p.project(Sector::Minus));
            let s = p.mode(1)[0].re;
            let on_face = (minus - 3.0).abs() < 1e-12 || s.abs() < 1e-12 || (s - 3.0).abs() < 1e-12;
            assert!(on_face);
            assert!(minus <= 3.0 + 1e-12 && (0.0..=3.0 + 1e-12).contains(&s));
        }
    }

    #[test]
    fn rho_values() {
        assert_eq!(rho(0.5), 1.0);
        assert_eq!(rho(-1.0), 1.0);
        assert!((rho(3.0) - 1.0 / 9.0).abs() < 1e-16);
        for x in [1.0, 2.0] {
            let h = 1e-7;
            assert!((rho(x - h) - rho(x + h)).abs() < 1e-6);
            let left = (rho(x) - rho(x - h)) / h;
            let right = (rho(x + h) - rho(x)) / h;
            assert!((left - right).abs() < 1e-5);
        }
        let mut prev = rho(1.0);
        for i in 1..=100 {
            let v = rho(1.0 + i as f64 / 100.0);
            assert!(v <= prev && v > 0.0);
            prev = v;
        }
    }

    #[test]
    fn perturb_identity_and_ball() {
        let g = e_plus(shape()).scaled(0.4);
        assert_eq!(perturb(&g, &Loop::zeros(shape())).unwrap(), g);
        let big = Loop::single_mode(shape(), 3, 0, Complex64::new(1.0, 0.0)).unwrap();
        assert!(matches!(
            perturb(&g, &big),
            Err(LabError::OutsidePerturbationBall { .. })
        ));
    }

    #[test]
    fn beta_in_flat_region_is_kinetic() {
        let m = HamiltonianModel::default();
        let b = estimate_beta(&m, shape(), 0.3, 4, 20, 3).unwrap();
        assert!((b - 0.045).abs() < 1e-12);
        assert_eq!(estimate_beta(&m, shape(), 0.0, 4, 20, 3).unwrap(), 0.0);
    }

    #[test]
    fn oracle_orbit_is_critical() {
        let m = HamiltonianModel::default();
        for k in [1, 2] {
            let o = radial_orbit_oracle(&m, shape(), k).unwrap();
            assert!(o.gradient_norm <= 1e-8);
            assert!((2.0 * m.dh(o.radius * o.radius) - k as f64).abs() < 1e-8);
            assert_eq!(o.winding, k);
        }
        assert!(matches!(
            radial_orbit_oracle(&m, shape(), 3),
            Err(LabError::NoRoot { level: 3 })
        ));
    }

    #[test]
    fn zero_seed_is_trivial_orbit() {
        let m = HamiltonianModel::default();
        let o = find_critical_point(&m, &Loop::zeros(shape()), 1.0, 1e-10, Some(0.1)).unwrap();
        assert_eq!(o.action, 0.0);
        assert!(o.below_beta);
        assert_eq!(o.winding, 0);
    }

    #[test]
    fn transversality_is_full_rank() {
        let t = transversality(&e_plus(shape())).unwrap();
        assert_eq!(t.rank, t.dimension);
        assert!((t.min_singular - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intersection_is_single_point() {
        let scan = intersection_scan(1.45, 4.0, &e_plus(shape()), 16, 4, 9, 1e-12).unwrap();
        assert!(scan.hits >= 1);
        assert!(scan.max_hit_offset < 1e-12);
        assert_eq!(scan.point_distance, 0.0);
    }
}
