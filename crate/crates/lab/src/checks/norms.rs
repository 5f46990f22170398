//! Loop-space identities, the Hamiltonian model, gradient consistency and the
//! energy/norm equivalence on cylinders.

use actionlab::hamiltonian::Variant;
use actionlab::{
    CylinderMap, CylinderNorm, HamiltonianModel, Loop, Sector, SobolevOrder, TimeGrid,
};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{anchor, guarded, rel_err};
use crate::context::Lab;
use crate::report::{Record, Recorder};

pub fn run(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "norms.parseval", anchor::PARSEVAL, None, |rec| parseval(lab, rec));
    guarded(rec, "norms.projections", anchor::PROJECTIONS, None, |rec| {
        projections(lab, rec)
    });
    guarded(rec, "norms.roundtrip", anchor::ROUNDTRIP, None, |rec| roundtrip(lab, rec));
    guarded(rec, "hamiltonian.pointwise", anchor::GRAD_H, None, |rec| {
        pointwise(lab, rec)
    });
    guarded(rec, "hamiltonian.splitting", anchor::SPLITTING, None, |rec| {
        splitting(lab, rec)
    });
    guarded(rec, "hamiltonian.k_factor", anchor::K_FACTOR, None, |rec| k_factor(lab, rec));
    guarded(rec, "hamiltonian.levels", anchor::LEVELS, None, |rec| levels(lab, rec));
    guarded(rec, "hamiltonian.action", anchor::ACTION, None, |rec| action(lab, rec));
    criterion_7(lab, rec);
    criterion_10(lab, rec);
}

fn test_loops(lab: &Lab, stream: u64, count: usize) -> Vec<Loop> {
    let mut rng = lab.rng(stream);
    (0..count)
        .map(|k| {
            let decay = rng.random_range(0.5..2.0);
            let scale = 10f64.powf(k as f64 / 3.0 - 1.5);
            Loop::random(lab.shape, decay, &mut rng).scaled(scale)
        })
        .collect()
}

fn random_point<R: Rng>(dim: usize, scale: f64, rng: &mut R) -> Vec<Complex64> {
    (0..dim)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * scale
        })
        .collect()
}

fn vec_norm(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vec_dist(x: &[Complex64], y: &[Complex64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt()
}

fn parseval(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("sobolev_norm");
    rec.hit("sample");
    let mut worst: f64 = 0.0;
    for g in test_loops(lab, 1, 10) {
        let norm_sq = g.sobolev_norm(SobolevOrder::Zero).powi(2);
        let samples = g.sample(lab.theta())?;
        let quad = samples
            .points()
            .map(|p| p.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            / samples.len() as f64;
        worst = worst.max((norm_sq - quad).abs() / norm_sq);
    }
    rec.push(Record::upper("norms.parseval", anchor::PARSEVAL, worst, 1e-10));
    Ok(())
}

fn projections(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("project");
    rec.hit("aps_project");
    rec.hit("inner");
    let mut defect: f64 = 0.0;
    let mut monotone = true;
    let mut inner_defect: f64 = 0.0;
    for g in test_loops(lab, 2, 10) {
        for (plus, minus) in [
            (g.project(Sector::Plus), g.project(Sector::Minus)),
            (g.aps_project(Sector::Plus), g.aps_project(Sector::Minus)),
        ] {
            defect = defect.max(plus.add(&minus)?.max_abs_diff(&g)?);
            let half = SobolevOrder::Half;
            monotone &= plus.sobolev_norm(half) <= g.sobolev_norm(half)
                && minus.sobolev_norm(half) <= g.sobolev_norm(half);
            defect = defect.max(plus.inner(&minus, SobolevOrder::Zero)?.abs());
        }
        for sector in [Sector::Plus, Sector::Minus] {
            let p = g.project(sector);
            defect = defect.max(p.project(sector).max_abs_diff(&p)?);
            let a = g.aps_project(sector);
            defect = defect.max(a.aps_project(sector).max_abs_diff(&a)?);
        }
        defect = defect
            .max(g.project(Sector::Plus).project(Sector::Minus).sobolev_norm(SobolevOrder::Zero))
            .max(
                g.aps_project(Sector::Plus)
                    .aps_project(Sector::Minus)
                    .sobolev_norm(SobolevOrder::Zero),
            );
        for order in [SobolevOrder::Zero, SobolevOrder::Half, SobolevOrder::One] {
            let n = g.sobolev_norm(order);
            inner_defect = inner_defect.max(rel_err(g.inner(&g, order)?, n * n, 1e-300));
        }
    }
    rec.push(Record::upper("norms.projections", anchor::PROJECTIONS, defect, 0.0));
    rec.push(Record::holds("norms.projection_monotone", anchor::NORM_MONOTONE, monotone));
    rec.push(Record::upper("norms.inner", anchor::INNER, inner_defect, 1e-14));
    Ok(())
}

fn roundtrip(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("synthesize");
    let n = lab.shape.cutoff;
    let mut worst: f64 = 0.0;
    for g in test_loops(lab, 3, 10) {
        let scale = g.sobolev_norm(SobolevOrder::Zero).max(1.0);
        for m in [2 * n + 2, 3 * n + 1, lab.theta()] {
            let back = Loop::synthesize(&g.sample(m)?, n)?;
            worst = worst.max(back.max_abs_diff(&g)? / scale);
        }
    }
    rec.push(Record::upper("norms.roundtrip", anchor::ROUNDTRIP, worst, 1e-12));
    let too_small = lab.shape.cutoff > 0 && Loop::zeros(lab.shape).sample(2 * n + 1).is_err();
    rec.push(Record::holds("norms.roundtrip_grid_guard", anchor::ROUNDTRIP, too_small));
    Ok(())
}

fn pointwise(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("eval_H");
    rec.hit("eval_gradH");
    rec.hit("eval_XH");
    let model = lab.model();
    let dim = lab.shape.dim;
    let mut rng = lab.rng(4);
    let mut fd_err: f64 = 0.0;
    let mut xh_err: f64 = 0.0;
    let mut flat_err: f64 = 0.0;
    for _ in 0..200 {
        // Points spread over the flat region, the band and beyond.
        let target = rng.random_range(0.0..(1.5 * model.s1()));
        let mut x = random_point(dim, 1.0, &mut rng);
        let scale = target.sqrt() / vec_norm(&x);
        x.iter_mut().for_each(|z| *z *= scale);
        let delta = random_point(dim, 1.0, &mut rng);
        let h = 1e-5;
        let shifted = |s: f64| -> Vec<Complex64> {
            x.iter().zip(&delta).map(|(a, b)| a + b * s).collect()
        };
        let fd = (model.eval_h(&shifted(h)) - model.eval_h(&shifted(-h))) / (2.0 * h);
        let grad = model.eval_grad_h(&x);
        let exact: f64 = grad.iter().zip(&delta).map(|(g, d)| (g.conj() * d).re).sum();
        if target > model.s0() * 1.01 && exact.abs() > 1e-3 {
            fd_err = fd_err.max(rel_err(fd, exact, 1e-300));
        }
        let xh = model.eval_xh(&x);
        let jgrad: Vec<Complex64> = grad.iter().map(|g| g * Complex64::i()).collect();
        xh_err = xh_err.max(vec_dist(&xh, &jgrad));
        if target <= model.s0() {
            flat_err = flat_err.max(model.eval_h(&x).abs()).max(vec_norm(&xh));
        } else if target >= model.s1() && model.variant() == Variant::Bump {
            let lin: Vec<Complex64> = x
                .iter()
                .map(|z| z * Complex64::new(0.0, 2.0 * model.slope()))
                .collect();
            flat_err = flat_err.max(vec_dist(&xh, &lin) / vec_norm(&x));
        }
    }
    rec.push(Record::upper("hamiltonian.grad_h_fd", anchor::GRAD_H, fd_err, 1e-6));
    rec.push(Record::upper("hamiltonian.xh_is_j_grad", anchor::GRAD_H, xh_err, 0.0));
    rec.push(Record::upper("hamiltonian.flat_and_quadratic", anchor::FLAT, flat_err, 1e-14));
    Ok(())
}

fn splitting(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("split");
    rec.hit("eval_compact_part");
    let model = lab.model();
    let split = model.split();
    let mut rng = lab.rng(5);
    let mut exact: f64 = 0.0;
    let mut outer: f64 = 0.0;
    for _ in 0..1000 {
        let r = rng.random_range(0.0..(1.5 * model.s1())).sqrt();
        let mut x = random_point(lab.shape.dim, 1.0, &mut rng);
        let f = r / vec_norm(&x);
        x.iter_mut().for_each(|z| *z *= f);
        let sum: Vec<Complex64> = split
            .eval_compact_part(&x)
            .iter()
            .zip(&x)
            .map(|(p, z)| p + split.c * z)
            .collect();
        exact = exact.max(vec_dist(&sum, &model.eval_xh(&x)) / (1.0 + vec_norm(&x)));
        if r * r >= model.s1() {
            outer = outer.max(vec_norm(&split.eval_compact_part(&x)));
        }
    }
    rec.push(
        Record::upper("hamiltonian.splitting_exact", anchor::SPLITTING, exact, 1e-15)
            .detail("c_imag", split.c.im)
            .detail("nonresonant", if split.nonresonant { 1.0 } else { 0.0 }),
    );
    rec.push(Record::upper("hamiltonian.compact_support", anchor::SPLITTING, outer, 0.0));

    // L² Lipschitz bound of X_{H_c} on loop pairs, through the pseudo-spectral
    // evaluation used by the solver.
    let grid = lab.theta();
    let mut worst: f64 = 0.0;
    let loops = test_loops(lab, 6, 2 * 50);
    for pair in loops.chunks_exact(2) {
        let (a, b) = (&pair[0], &pair[1].scaled(0.3).add(&pair[0])?);
        let compact = |g: &Loop| -> actionlab::Result<Loop> {
            let gh = model.grad_h_loop(g, grid)?;
            gh.scaled_complex(Complex64::i()).sub(&g.scaled_complex(split.c))
        };
        let num = compact(a)?.sub(&compact(b)?)?.sobolev_norm(SobolevOrder::Zero);
        let den = a.sub(b)?.sobolev_norm(SobolevOrder::Zero);
        worst = worst.max(num / den);
    }
    rec.push(
        Record::upper(
            "hamiltonian.compact_lipschitz",
            anchor::COMPACT_LIPSCHITZ,
            worst,
            split.lipschitz * (1.0 + 1e-9),
        )
        .detail("lipschitz", split.lipschitz),
    );
    Ok(())
}

fn k_factor(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("k_factor");
    let model = lab.model();
    if model.variant() != Variant::Bump {
        let rejected = model.k_factor(&[Complex64::new(1.0, 0.0)]).is_err();
        rec.push(Record::holds("hamiltonian.k_factor_rejects_quadratic", anchor::K_FACTOR, rejected));
        return Ok(());
    }
    let c = model.k_constant()?;
    let mut rng = lab.rng(7);
    let dim = lab.shape.dim;
    let mut product: f64 = 0.0;
    let mut identity: f64 = 0.0;
    let mut growth: f64 = 0.0;
    for _ in 0..10_000 {
        let mut draw = || {
            let r = rng.random_range(0.0..(1.5 * model.s1())).sqrt();
            let mut x = random_point(dim, 1.0, &mut rng);
            let f = r / vec_norm(&x);
            x.iter_mut().for_each(|z| *z *= f);
            x
        };
        let (x, y) = (draw(), draw());
        let kx = model.k_factor(&x)?;
        let ky = model.k_factor(&y)?;
        let fx: Vec<Complex64> = x.iter().map(|z| kx * z).collect();
        let fy: Vec<Complex64> = y.iter().map(|z| ky * z).collect();
        identity = identity.max(vec_dist(&fx, &model.eval_xh(&x)));
        let bound = 2.0 * c * (vec_norm(&x) + vec_norm(&y)) * vec_dist(&x, &y);
        if bound > 0.0 {
            product = product.max(vec_dist(&fx, &fy) / bound);
        }
        let nx = vec_norm(&x);
        if nx > 0.0 {
            growth = growth.max(kx.norm() / (c * nx));
        }
    }
    rec.push(Record::upper("hamiltonian.k_factor_identity", anchor::K_FACTOR, identity, 0.0));
    rec.push(
        Record::upper("hamiltonian.k_factor_product", anchor::K_FACTOR, product, 1.0 + 1e-9)
            .detail("C", c),
    );
    rec.push(Record::upper("hamiltonian.k_factor_growth", anchor::K_FACTOR, growth, 1.0 + 1e-9));
    Ok(())
}

fn levels(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    let model = lab.model();
    if model.variant() != Variant::Bump {
        return Ok(());
    }
    let top = 2.0 * model.slope();
    let mut worst: f64 = 0.0;
    let mut k = 1;
    while (k as f64) < top {
        let s = model.level_root(k)?;
        worst = worst.max((2.0 * model.dh(s) - k as f64).abs());
        k += 1;
    }
    let beyond = model.level_root(k).is_err();
    rec.push(Record::upper("hamiltonian.level_roots", anchor::LEVELS, worst, 1e-8).detail("levels", (k - 1) as f64));
    rec.push(Record::holds("hamiltonian.level_beyond_range", anchor::LEVELS, beyond));
    Ok(())
}

fn action(lab: &Lab, rec: &mut Recorder) -> actionlab::Result<()> {
    rec.hit("action");
    let model = lab.model();
    let grid = lab.theta();
    let mut worst: f64 = model.action(&Loop::zeros(lab.shape), grid)?.abs();
    for k in [1i64, 2, 3, -1] {
        if k.unsigned_abs() as usize > lab.shape.cutoff {
            continue;
        }
        for r in [0.1, 0.7, 1.3, 2.5] {
            let g = Loop::single_mode(lab.shape, k, 0, Complex64::new(0.0, r))?;
            let exact = 0.5 * k as f64 * r * r - model.h(r * r);
            worst = worst.max(rel_err(model.action(&g, grid)?, exact, 1.0));
        }
    }
    rec.push(Record::upper("hamiltonian.action_radial", anchor::ACTION, worst, 1e-12));
    Ok(())
}

/// Directional derivatives of the action against central differences.
pub fn criterion_7(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c07.gradient_consistency", anchor::GRADIENT, Some(7), |rec| {
        rec.hit("grad_action");
        let model = lab.model();
        let grid = lab.theta();
        let mut rng = lab.rng(8);
        let h = 1e-4;
        let (mut worst, mut worst_abs): (f64, f64) = (0.0, 0.0);
        let pairs = lab.config.samples.gradient_pairs;
        for _ in 0..pairs {
            let decay = rng.random_range(1.0..2.5);
            let g = Loop::random(lab.shape, decay, &mut rng);
            // L² norms between 0.3 and 2.5 put the samples across the band.
            let radius = rng.random_range(0.3..2.5);
            let g = g.scaled(radius / g.sobolev_norm(SobolevOrder::Zero));
            let d = Loop::random(lab.shape, decay, &mut rng);
            let d = d.scaled(1.0 / d.sobolev_norm(SobolevOrder::Zero));
            let exact = model.grad_action(&g, grid)?.inner(&d, SobolevOrder::Zero)?;
            let mut plus = g.clone();
            plus.axpy(h, &d)?;
            let mut minus = g.clone();
            minus.axpy(-h, &d)?;
            let fd = (model.action(&plus, grid)? - model.action(&minus, grid)?) / (2.0 * h);
            worst = worst.max(rel_err(fd, exact, 1e-300));
            worst_abs = worst_abs.max((fd - exact).abs() / (1.0 + exact.abs()));
        }
        rec.push(
            Record::upper("c07.gradient_consistency", anchor::GRADIENT, worst, 1e-5)
                .criterion(7)
                .detail("pairs", pairs as f64)
                .detail("step", h)
                .detail("max_err_over_1_plus_abs", worst_abs),
        );
        Ok(())
    });
}

/// Lower and upper constants of `E(u)/‖u‖²_{L²_1}` for `∂_t u + J(u_θ − c u)`:
/// per mode the θ-term contributes `(n − κ)²|u_n|²` with `c = iκ`.
pub fn equivalence_constants(kappa: f64, cutoff: usize) -> (f64, f64, i64) {
    let (mut lo, mut hi, mut arg) = (1.0f64, 1.0f64, 0i64);
    for n in -(cutoff as i64)..=(cutoff as i64) {
        let nf = n as f64;
        let r = (nf - kappa).powi(2) / (1.0 + nf * nf);
        if r < lo {
            lo = r;
            arg = n;
        }
        hi = hi.max(r);
    }
    (0.5 * lo, 0.5 * hi, arg)
}

fn ratio(model: &HamiltonianModel, u: &CylinderMap) -> f64 {
    u.energy(model) / u.norm(CylinderNorm::L2_1).powi(2)
}

/// Energy/norm equivalence for the linear problem `X_H = c·u`.
pub fn verify_energy_norm_equivalence(lab: &Lab, rec: &mut Recorder) {
    criterion_10(lab, rec);
}

pub fn criterion_10(lab: &Lab, rec: &mut Recorder) {
    guarded(rec, "c10.energy_norm_equivalence", anchor::NORM_EQUIVALENCE, Some(10), |rec| {
        rec.hit("verify_energy_norm_equivalence");
        rec.hit("energy");
        rec.hit("cyl_norm");
        let cutoff = lab.shape.cutoff;
        let grid = TimeGrid::new(0.5, lab.config.m_t)?;
        let nonresonant = HamiltonianModel::pure_quadratic(0.1)?;
        let kappa = 2.0 * nonresonant.slope();
        let (m, big_m, arg) = equivalence_constants(kappa, cutoff);
        // Normalization of the extremal mode: E/‖u‖² = ½(n−κ)²/(1+n²).
        let normalization = 0.5 / (1.0 + (arg * arg) as f64);
        let gap = (arg as f64 - kappa).powi(2);
        rec.push(
            Record::lower(
                "c10.nonresonant_lower_bound",
                anchor::NORM_EQUIVALENCE,
                m,
                0.04 * normalization * (1.0 - 1e-12),
            )
            .criterion(10)
            .detail("kappa", kappa)
            .detail("argmin_mode", arg as f64)
            .detail("min_gap_sq", gap)
            .detail("M", big_m),
        );

        let mut rng = lab.rng(9);
        let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
        for _ in 0..lab.config.samples.random_fields {
            let decay = rng.random_range(0.0..2.0);
            let u = CylinderMap::random_smooth(lab.shape, &grid, 3, decay, &mut rng);
            let r = ratio(&nonresonant, &u);
            lo = lo.min(r);
            hi = hi.max(r);
        }
        rec.push(
            Record::lower("c10.sampled_ratio_above_m", anchor::NORM_EQUIVALENCE, lo, m * (1.0 - 1e-12))
                .criterion(10)
                .detail("m", m),
        );
        rec.push(
            Record::upper("c10.sampled_ratio_below_M", anchor::NORM_EQUIVALENCE, hi, big_m * (1.0 + 1e-12))
                .criterion(10)
                .detail("M", big_m),
        );

        // t-independent single-mode fields attain ½(n−κ)²/(1+n²) exactly.
        let mut closed: f64 = 0.0;
        for n in -(cutoff as i64)..=(cutoff as i64) {
            let g = Loop::single_mode(lab.shape, n, 0, Complex64::new(0.6, -0.3))?;
            let u = CylinderMap::constant(&g, &grid);
            let nf = n as f64;
            let exact = 0.5 * (nf - kappa).powi(2) / (1.0 + nf * nf);
            closed = closed.max((ratio(&nonresonant, &u) - exact).abs());
        }
        rec.push(
            Record::upper("c10.single_mode_closed_form", anchor::NORM_EQUIVALENCE, closed, 1e-12)
                .criterion(10),
        );

        // Resonant c = 2i: the mode-2 constant field has zero energy.
        let resonant = HamiltonianModel::pure_quadratic(0.0)?;
        let (m_res, _, arg_res) = equivalence_constants(2.0 * resonant.slope(), cutoff);
        let g = Loop::single_mode(lab.shape, 2.min(cutoff as i64), 0, Complex64::new(0.6, -0.3))?;
        let degenerate = ratio(&resonant, &CylinderMap::constant(&g, &grid));
        rec.push(
            Record::upper("c10.resonant_ratio_degenerates", anchor::NORM_EQUIVALENCE, degenerate, 1e-12)
                .criterion(10)
                .detail("m_resonant", m_res)
                .detail("argmin_mode", arg_res as f64),
        );
        rec.push(
            Record::upper("c10.resonant_lower_bound_zero", anchor::NORM_EQUIVALENCE, m_res, 0.0)
                .criterion(10),
        );
        Ok(())
    });
}
