//! Radial Hamiltonians `H(x) = h(|x|²)` and the action functional on loops.
//!
//! The bump variant is flat for `|x|² ≤ s0` and affine in `|x|²` with slope
//! `1+ε` for `|x|² ≥ s1`; in between `h'` is a quintic smoothstep, so `h` is
//! `C²`, `h'` is monotone and `2h'` sweeps `[0, 2(1+ε)]` exactly once.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::loopspace::Loop;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Bump,
    PureQuadratic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HamiltonianModel {
    #[serde(rename = "eps_H")]
    eps_h: f64,
    s0: f64,
    s1: f64,
    variant: Variant,
}

impl Default for HamiltonianModel {
    fn default() -> Self {
        Self {
            eps_h: 0.1,
            s0: 0.25,
            s1: 4.0,
            variant: Variant::Bump,
        }
    }
}

fn smoothstep(x: f64) -> f64 {
    x * x * x * (10.0 + x * (-15.0 + 6.0 * x))
}

fn smoothstep_slope(x: f64) -> f64 {
    30.0 * x * x * (1.0 - x) * (1.0 - x)
}

/// `∫₀ˣ smoothstep`.
fn smoothstep_integral(x: f64) -> f64 {
    x.powi(4) * (2.5 + x * (-3.0 + x))
}

impl HamiltonianModel {
    pub fn new(eps_h: f64, s0: f64, s1: f64, variant: Variant) -> Result<Self> {
        let model = Self {
            eps_h,
            s0,
            s1,
            variant,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn pure_quadratic(eps_h: f64) -> Result<Self> {
        Self::new(eps_h, 0.25, 4.0, Variant::PureQuadratic)
    }

    /// Re-checks parameters, e.g. after deserialization.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps_h.is_finite() && self.eps_h >= 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "eps_H must be finite and nonnegative, got {}",
                self.eps_h
            )));
        }
        if !(self.s0.is_finite() && self.s0 > 0.0 && self.s1.is_finite() && self.s1 > self.s0) {
            return Err(LabError::InvalidParameter(format!(
                "need 0 < s0 < s1, got s0 = {}, s1 = {}",
                self.s0, self.s1
            )));
        }
        Ok(())
    }

    pub fn eps_h(&self) -> f64 {
        self.eps_h
    }

    pub fn s0(&self) -> f64 {
        self.s0
    }

    pub fn s1(&self) -> f64 {
        self.s1
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    /// Slope `1+ε` of `h` at infinity.
    pub fn slope(&self) -> f64 {
        1.0 + self.eps_h
    }

    fn band(&self, s: f64) -> f64 {
        (s - self.s0) / (self.s1 - self.s0)
    }

    /// The profile `h(s)`.
    pub fn h(&self, s: f64) -> f64 {
        let a = self.slope();
        match self.variant {
            Variant::PureQuadratic => a * s,
            Variant::Bump => {
                if s <= self.s0 {
                    0.0
                } else if s >= self.s1 {
                    a * (s - 0.5 * (self.s0 + self.s1))
                } else {
                    a * (self.s1 - self.s0) * smoothstep_integral(self.band(s))
                }
            }
        }
    }

    pub fn dh(&self, s: f64) -> f64 {
        let a = self.slope();
        match self.variant {
            Variant::PureQuadratic => a,
            Variant::Bump => {
                if s <= self.s0 {
                    0.0
                } else if s >= self.s1 {
                    a
                } else {
                    a * smoothstep(self.band(s))
                }
            }
        }
    }

    pub fn d2h(&self, s: f64) -> f64 {
        match self.variant {
            Variant::PureQuadratic => 0.0,
            Variant::Bump => {
                if s <= self.s0 || s >= self.s1 {
                    0.0
                } else {
                    self.slope() / (self.s1 - self.s0) * smoothstep_slope(self.band(s))
                }
            }
        }
    }

    pub fn eval_h(&self, x: &[Complex64]) -> f64 {
        self.h(norm_sqr(x))
    }

    /// `∇H(x) = 2h'(|x|²)x`.
    pub fn eval_grad_h(&self, x: &[Complex64]) -> Vec<Complex64> {
        let f = 2.0 * self.dh(norm_sqr(x));
        x.iter().map(|z| z * f).collect()
    }

    /// `X_H(x) = J∇H(x) = 2h'(|x|²)·i·x`.
    pub fn eval_xh(&self, x: &[Complex64]) -> Vec<Complex64> {
        let f = Complex64::new(0.0, 2.0 * self.dh(norm_sqr(x)));
        x.iter().map(|z| z * f).collect()
    }

    /// Derivative of `∇H` at `x` applied to `δ`:
    /// `2h'δ + 4h''·Re⟨x,δ⟩·x`.
    pub fn grad_h_derivative(&self, x: &[Complex64], delta: &[Complex64], out: &mut [Complex64]) {
        let s = norm_sqr(x);
        let a = 2.0 * self.dh(s);
        let b = 4.0 * self.d2h(s) * x.iter().zip(delta).map(|(p, q)| (p.conj() * q).re).sum::<f64>();
        for ((o, d), p) in out.iter_mut().zip(delta).zip(x) {
            *o = d * a + p * b;
        }
    }

    /// `K(x)` with `X_H(x) = K(x)·x`, returned as the complex scalar
    /// `2h'(|x|²)·i` (the map is that scalar times the identity).
    pub fn k_factor(&self, x: &[Complex64]) -> Result<Complex64> {
        if self.variant == Variant::PureQuadratic {
            return Err(LabError::NotFlatNearOrigin);
        }
        Ok(Complex64::new(0.0, 2.0 * self.dh(norm_sqr(x))))
    }

    /// Smallest `C` with `|Df(z)| ≤ 2C|z|` for `f(z) = K(z)z`, which gives
    /// `|K(x)| ≤ C|x|` and `|K(x)x − K(y)y| ≤ 2C(|x|+|y|)|x−y|`.
    pub fn k_constant(&self) -> Result<f64> {
        if self.variant == Variant::PureQuadratic {
            return Err(LabError::NotFlatNearOrigin);
        }
        let f = |s: f64| (2.0 * self.dh(s) + 4.0 * self.d2h(s) * s) / (2.0 * s.sqrt());
        Ok(self.sup_on_band(f))
    }

    /// Dense sampling of `[s0, s1]` followed by golden-section refinement.
    fn sup_on_band<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        const SAMPLES: usize = 4096;
        let width = (self.s1 - self.s0) / SAMPLES as f64;
        let (mut best_s, mut best) = (self.s0, f64::NEG_INFINITY);
        for i in 0..=SAMPLES {
            let s = self.s0 + width * i as f64;
            let v = f(s);
            if v > best {
                best = v;
                best_s = s;
            }
        }
        let (mut lo, mut hi) = ((best_s - width).max(self.s0), (best_s + width).min(self.s1));
        let g = 0.5 * (5f64.sqrt() - 1.0);
        for _ in 0..80 {
            let m1 = hi - g * (hi - lo);
            let m2 = lo + g * (hi - lo);
            if f(m1) < f(m2) {
                lo = m1;
            } else {
                hi = m2;
            }
        }
        best.max(f(0.5 * (lo + hi)))
    }

    pub fn split(&self) -> Splitting {
        let a = self.slope();
        let lipschitz = match self.variant {
            Variant::PureQuadratic => 0.0,
            Variant::Bump => self.sup_on_band(|s| {
                let base = 2.0 * self.dh(s) - 2.0 * a;
                base.abs().max((base + 4.0 * self.d2h(s) * s).abs())
            }),
        };
        let two_a = 2.0 * a;
        Splitting {
            model: *self,
            c: Complex64::new(0.0, two_a),
            nonresonant: (two_a - two_a.round()).abs() > 1e-12,
            lipschitz,
        }
    }

    /// `½Σ n|c_n|² − (1/M)Σ_j H(γ(θ_j))`.
    pub fn action(&self, gamma: &Loop, grid: usize) -> Result<f64> {
        let samples = gamma.sample(grid)?;
        let quad: f64 = samples.points().map(|p| self.eval_h(p)).sum::<f64>() / grid as f64;
        let kinetic: f64 = gamma
            .modes()
            .map(|(n, c)| n as f64 * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum();
        Ok(0.5 * kinetic - quad)
    }

    /// Pseudo-spectral `∇H∘γ`, truncated to the loop's modes.
    pub fn grad_h_loop(&self, gamma: &Loop, grid: usize) -> Result<Loop> {
        let samples = gamma.sample(grid)?;
        let mapped = samples.map_points(|x, y| {
            let f = 2.0 * self.dh(norm_sqr(x));
            for (o, z) in y.iter_mut().zip(x) {
                *o = z * f;
            }
        });
        Loop::synthesize(&mapped, gamma.cutoff())
    }

    /// `∇CSD_H(γ)`: mode `n` is `n·c_n − (∇H∘γ)_n`.
    pub fn grad_action(&self, gamma: &Loop, grid: usize) -> Result<Loop> {
        let mut out = self.grad_h_loop(gamma, grid)?;
        for ((n, o), (_, c)) in out.modes_mut().zip(gamma.modes()) {
            for (p, q) in o.iter_mut().zip(c) {
                *p = q * n as f64 - *p;
            }
        }
        Ok(out)
    }

    /// Unique `s ∈ (s0, s1)` with `2h'(s) = k`, by bisection.
    pub fn level_root(&self, k: i64) -> Result<f64> {
        let level = k as f64;
        if self.variant == Variant::PureQuadratic || level <= 0.0 || level >= 2.0 * self.slope() {
            return Err(LabError::NoRoot { level: k });
        }
        let (mut lo, mut hi) = (self.s0, self.s1);
        while hi - lo > 1e-13 * hi {
            let mid = 0.5 * (lo + hi);
            if 2.0 * self.dh(mid) < level {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        Ok(0.5 * (lo + hi))
    }
}

/// Linear/compact decomposition `X_H(x) = c·x + X_{H_c}(x)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Splitting {
    #[serde(skip)]
    model: HamiltonianModel,
    pub c: Complex64,
    /// `c ∉ i·ℤ`.
    pub nonresonant: bool,
    /// Global Lipschitz constant of `X_{H_c}`.
    pub lipschitz: f64,
}

impl Splitting {
    /// `X_{H_c}(x) = (2h'(|x|²) − 2(1+ε))·i·x`.
    pub fn eval_compact_part(&self, x: &[Complex64]) -> Vec<Complex64> {
        let f = Complex64::new(0.0, 2.0 * (self.model.dh(norm_sqr(x)) - self.model.slope()));
        x.iter().map(|z| z * f).collect()
    }
}

pub(crate) fn norm_sqr(x: &[Complex64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::loopspace::{Shape, SobolevOrder};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn flat_region_is_zero() {
        let m = HamiltonianModel::default();
        let x = [c(0.3, 0.1), c(-0.2, 0.2)];
        assert_eq!(m.eval_h(&x), 0.0);
        assert!(m.eval_grad_h(&x).iter().all(|z| z.norm() == 0.0));
        assert!(m.eval_xh(&x).iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn quadratic_at_infinity() {
        let m = HamiltonianModel::default();
        let x = [c(2.0, 1.0)];
        let xh = m.eval_xh(&x);
        assert!((xh[0] - c(0.0, 2.2) * x[0]).norm() < 1e-14);
    }

    #[test]
    fn profile_is_continuous_at_band_ends() {
        let m = HamiltonianModel::default();
        for s in [m.s0(), m.s1()] {
            let (l, r) = (s - 1e-12, s + 1e-12);
            assert!((m.h(l) - m.h(r)).abs() < 1e-10);
            assert!((m.dh(l) - m.dh(r)).abs() < 1e-10);
            assert!((m.d2h(l) - m.d2h(r)).abs() < 1e-9);
        }
    }

    #[test]
    fn profile_derivatives_match_finite_differences() {
        let m = HamiltonianModel::default();
        let step = 1e-6;
        for i in 1..50 {
            let s = m.s0() + (m.s1() - m.s0()) * i as f64 / 50.0;
            let dh = (m.h(s + step) - m.h(s - step)) / (2.0 * step);
            let d2h = (m.dh(s + step) - m.dh(s - step)) / (2.0 * step);
            assert!((dh - m.dh(s)).abs() < 1e-8);
            assert!((d2h - m.d2h(s)).abs() < 1e-7);
        }
    }

    #[test]
    fn gradient_matches_finite_difference_in_band() {
        let m = HamiltonianModel::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let r: f64 = rng.random_range(0.6..1.9);
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let x = [Complex64::from_polar(r, phase)];
            let g = m.eval_grad_h(&x)[0];
            let step = 1e-6;
            let d_re = (m.eval_h(&[x[0] + step]) - m.eval_h(&[x[0] - step])) / (2.0 * step);
            let d_im = (m.eval_h(&[x[0] + c(0.0, step)]) - m.eval_h(&[x[0] - c(0.0, step)]))
                / (2.0 * step);
            let fd = c(d_re, d_im);
            assert!((fd - g).norm() <= 1e-6 * g.norm().max(1.0));
        }
    }

    #[test]
    fn k_factor_reproduces_vector_field() {
        let m = HamiltonianModel::default();
        let x = [c(0.8, -0.3), c(0.1, 0.9)];
        let k = m.k_factor(&x).unwrap();
        let xh = m.eval_xh(&x);
        for (p, q) in xh.iter().zip(&x) {
            assert_eq!(*p, k * q);
        }
        assert_eq!(m.k_factor(&[c(0.1, 0.0)]).unwrap(), c(0.0, 0.0));
        let quad = HamiltonianModel::pure_quadratic(0.1).unwrap();
        assert_eq!(quad.k_factor(&x).unwrap_err(), LabError::NotFlatNearOrigin);
    }

    #[test]
    fn k_product_bound_on_random_pairs() {
        let m = HamiltonianModel::default();
        let kc = m.k_constant().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10_000 {
            let mut draw = || {
                let r: f64 = rng.random_range(0.0..2.5);
                [
                    Complex64::from_polar(r, rng.random_range(0.0..6.3)),
                    Complex64::from_polar(rng.random_range(0.0..1.0), rng.random_range(0.0..6.3)),
                ]
            };
            let (x, y) = (draw(), draw());
            let fx = m.eval_xh(&x);
            let fy = m.eval_xh(&y);
            let lhs = norm_sqr(&[fx[0] - fy[0], fx[1] - fy[1]]).sqrt();
            let dist = norm_sqr(&[x[0] - y[0], x[1] - y[1]]).sqrt();
            let rhs = 2.0 * kc * (norm_sqr(&x).sqrt() + norm_sqr(&y).sqrt()) * dist;
            assert!(lhs <= rhs * (1.0 + 1e-9) + 1e-15);
        }
    }

    #[test]
    fn splitting_is_exact_and_compact_part_vanishes_outside() {
        let m = HamiltonianModel::default();
        let spl = m.split();
        assert!((spl.c - c(0.0, 2.2)).norm() < 1e-15);
        assert!(spl.nonresonant);
        for x in [[c(0.3, 0.0)], [c(1.0, 0.7)], [c(3.0, -1.0)]] {
            let lhs = m.eval_xh(&x)[0];
            let rhs = spl.c * x[0] + spl.eval_compact_part(&x)[0];
            assert!((lhs - rhs).norm() < 1e-14);
        }
        assert_eq!(spl.eval_compact_part(&[c(2.0, 0.5)])[0], c(0.0, 0.0));
        let resonant = HamiltonianModel::pure_quadratic(0.0).unwrap().split();
        assert!(!resonant.nonresonant);
    }

    #[test]
    fn every_integer_level_has_a_root() {
        let m = HamiltonianModel::default();
        for k in [1, 2] {
            let s = m.level_root(k).unwrap();
            assert!((2.0 * m.dh(s) - k as f64).abs() < 1e-10);
        }
        assert_eq!(m.level_root(3).unwrap_err(), LabError::NoRoot { level: 3 });
        assert!(m.level_root(0).is_err());
    }

    #[test]
    fn action_in_flat_region_is_kinetic() {
        let m = HamiltonianModel::default();
        let s = Shape::new(1, 8).unwrap();
        let g = Loop::single_mode(s, 1, 0, c(0.1, 0.0)).unwrap();
        assert!((m.action(&g, 32).unwrap() - 0.005).abs() < 1e-15);
        assert_eq!(m.action(&Loop::zeros(s), 32).unwrap(), 0.0);
        let grad = m.grad_action(&g, 32).unwrap();
        assert!(grad.approx_eq(&g, 1e-15));
    }

    #[test]
    fn radial_loop_action_closed_form() {
        let m = HamiltonianModel::default();
        let s = Shape::new(1, 8).unwrap();
        for (k, r) in [(1, 1.2), (2, 0.9), (3, 2.5)] {
            let g = Loop::single_mode(s, k, 0, c(r, 0.0)).unwrap();
            let expected = 0.5 * k as f64 * r * r - m.h(r * r);
            assert!((m.action(&g, 32).unwrap() - expected).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_matches_action_difference() {
        let m = HamiltonianModel::default();
        let s = Shape::new(2, 8).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let g = Loop::random(s, 1.0, &mut rng).scaled(0.8);
        let dir = Loop::random(s, 1.0, &mut rng);
        let grad = m.grad_action(&g, 32).unwrap();
        let lhs = grad.inner(&dir, SobolevOrder::Zero).unwrap();
        let step = 1e-4;
        let plus = m.action(&g.add(&dir.scaled(step)).unwrap(), 32).unwrap();
        let minus = m.action(&g.sub(&dir.scaled(step)).unwrap(), 32).unwrap();
        let fd = (plus - minus) / (2.0 * step);
        assert!((lhs - fd).abs() <= 1e-5 * (1.0 + lhs.abs()));
    }

    #[test]
    fn model_json_roundtrip() {
        let m = HamiltonianModel::default();
        let json = serde_json::to_string(&m).unwrap();
        assert_eq!(json, r#"{"eps_H":0.1,"s0":0.25,"s1":4.0,"variant":"bump"}"#);
        let back: HamiltonianModel = serde_json::from_str(&json).unwrap();
        assert_eq!(back, m);
    }
}
