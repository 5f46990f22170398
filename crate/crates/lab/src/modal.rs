//! Per-mode operator norms of `P` and `Q` on a single Fourier mode.
//!
//! Both operators act mode by mode, so on the full cylinder their norms are
//! suprema of these per-mode numbers. Sampling modes well beyond the loop
//! cutoff removes the truncation from the uniformity-in-`ε` checks.

use actionlab::loopspace::{l_eigenvalue, SobolevOrder};
use actionlab::{Result, TimeGrid};
use num_complex::Complex64;

const POWER_STEPS: usize = 60;

/// Grid on `[0, ε]` resolving the boundary layer of width `1/|λ|`.
pub fn resolved_grid(n: i64, eps: f64, floor: usize) -> Result<TimeGrid> {
    let layer = (8.0 * n.unsigned_abs() as f64 * eps).ceil() as usize;
    TimeGrid::new(eps, layer.max(floor))
}

fn zeros(len: usize) -> Vec<Complex64> {
    vec![Complex64::new(0.0, 0.0); len]
}

/// `sup ‖P g‖_{L²_1} / ‖g‖_{L²}` over forcing on mode `n`, by power iteration on
/// the discretized normal operator.
pub fn p_norm(n: i64, grid: &TimeGrid) -> f64 {
    let len = grid.nodes();
    let w = grid.weights();
    let lambda = l_eigenvalue(n);
    let sob = SobolevOrder::One.weight(n);
    // Deterministic start with all frequencies present.
    let mut x: Vec<Complex64> = (0..len)
        .map(|j| Complex64::new(1.0 + 0.5 * ((j as f64) * 0.7).sin(), 0.0))
        .collect();
    let (mut g, mut u, mut du) = (zeros(len), zeros(len), zeros(len));
    let (mut y, mut back, mut tmp) = (zeros(len), zeros(len), zeros(len));
    let mut sigma_sq = 0.0;
    for _ in 0..POWER_STEPS {
        let norm = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        x.iter_mut().for_each(|v| *v /= norm);
        for j in 0..len {
            g[j] = x[j] / w[j].sqrt();
        }
        grid.duhamel(lambda, &g, &mut u);
        grid.derivative(&u, &mut du);
        for j in 0..len {
            tmp[j] = du[j] * w[j];
        }
        grid.derivative_transpose(&tmp, &mut back);
        for j in 0..len {
            y[j] = u[j] * (w[j] * sob) + back[j];
        }
        grid.duhamel_transpose(lambda, &y, &mut back);
        for j in 0..len {
            x[j] = back[j] / w[j].sqrt();
        }
        sigma_sq = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    }
    sigma_sq.sqrt()
}

/// `‖Q φ_n‖_{L²_1} / ‖φ_n‖_{L²_{1/2}}` for the unit boundary datum on mode `n`.
pub fn q_norm(n: i64, grid: &TimeGrid) -> f64 {
    let lambda = l_eigenvalue(n);
    let t_end = grid.length();
    let q: Vec<Complex64> = (0..grid.nodes())
        .map(|j| {
            let t = grid.time(j);
            let v = if lambda >= 0.0 {
                -(-lambda * t).exp()
            } else {
                (-lambda * (t - t_end)).exp()
            };
            Complex64::new(v, 0.0)
        })
        .collect();
    let mut dq = zeros(q.len());
    grid.derivative(&q, &mut dq);
    let sob = SobolevOrder::One.weight(n);
    let density: Vec<f64> = q
        .iter()
        .zip(&dq)
        .map(|(a, b)| sob * a.norm_sqr() + b.norm_sqr())
        .collect();
    (grid.integrate(&density) / SobolevOrder::Half.weight(n)).sqrt()
}

/// `sup ‖(P g)|_∂‖_{L²_{1/2}} / ‖g‖_{L²}` on mode `n`. The APS components of
/// `P g` vanish, so only the far end contributes: `t = ε` for `n ≤ 0`,
/// `t = 0` for `n > 0`. The restriction is a linear functional whose norm is
/// read off its representer.
pub fn restriction_norm(n: i64, grid: &TimeGrid) -> f64 {
    let len = grid.nodes();
    let lambda = l_eigenvalue(n);
    let mut e = zeros(len);
    if lambda >= 0.0 {
        e[len - 1] = Complex64::new(1.0, 0.0);
    } else {
        e[0] = Complex64::new(1.0, 0.0);
    }
    let mut c = zeros(len);
    grid.duhamel_transpose(lambda, &e, &mut c);
    let dual: f64 = c
        .iter()
        .zip(grid.weights())
        .map(|(v, w)| v.norm_sqr() / w)
        .sum();
    (SobolevOrder::Half.weight(n) * dual).sqrt()
}

/// Modes `0, ±1, …, ±N` plus a log-uniform sample of `|n|` up to `max_mode`.
pub fn mode_window(cutoff: usize, max_mode: usize, extra: usize) -> Vec<i64> {
    let mut modes: Vec<i64> = (0..=cutoff as i64).flat_map(|n| [n, -n]).collect();
    modes.dedup();
    if max_mode > cutoff && extra > 0 {
        let (lo, hi) = ((cutoff as f64).ln(), (max_mode as f64).ln());
        for k in 1..=extra {
            let m = (lo + (hi - lo) * k as f64 / extra as f64).exp().round() as i64;
            modes.push(m);
            modes.push(-m);
        }
    }
    modes.sort_unstable();
    modes.dedup();
    modes
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_mode_restriction_is_sqrt_length() {
        let grid = TimeGrid::new(0.3, 64).unwrap();
        assert!((restriction_norm(0, &grid) - 0.3f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn restriction_matches_closed_form() {
        // sup over a of |∫ e^{-λ(ε-τ)} a| / ‖a‖ = sqrt((1 - e^{-2λε}) / 2λ)
        for (n, eps) in [(-5i64, 0.1), (7, 0.5)] {
            let grid = resolved_grid(n, eps, 512).unwrap();
            let lam = n.unsigned_abs() as f64;
            let exact = (lam * (1.0 - (-2.0 * lam * eps).exp()) / (2.0 * lam)).sqrt();
            assert!((restriction_norm(n, &grid) - exact).abs() < 1e-6 * exact);
        }
    }

    #[test]
    fn q_norm_closed_form() {
        let (n, eps) = (-4i64, 0.2);
        let grid = resolved_grid(n, eps, 512).unwrap();
        let lam = 4.0;
        let exact = ((1.0 + 2.0 * lam * lam) * (1.0 - (-2.0 * lam * eps).exp()) / (2.0 * lam * lam)).sqrt();
        assert!((q_norm(n, &grid) - exact).abs() < 1e-8);
    }

    #[test]
    fn p_norm_dominates_random_inputs() {
        let grid = TimeGrid::new(0.5, 64).unwrap();
        let norm = p_norm(3, &grid);
        let g: Vec<Complex64> = (0..65).map(|j| Complex64::new((j as f64 * 0.37).cos(), 0.0)).collect();
        let mut u = zeros(65);
        let mut du = zeros(65);
        grid.duhamel(-3.0, &g, &mut u);
        grid.derivative(&u, &mut du);
        let num: Vec<f64> = u.iter().zip(&du).map(|(a, b)| 10.0 * a.norm_sqr() + b.norm_sqr()).collect();
        let den: Vec<f64> = g.iter().map(|v| v.norm_sqr()).collect();
        let ratio = (grid.integrate(&num) / grid.integrate(&den)).sqrt();
        assert!(ratio <= norm * (1.0 + 1e-9));
    }

    #[test]
    fn window_contains_cutoff_modes() {
        let w = mode_window(4, 100, 5);
        for n in -4..=4 {
            assert!(w.contains(&n));
        }
        assert!(w.contains(&100) && w.contains(&-100));
    }
}
