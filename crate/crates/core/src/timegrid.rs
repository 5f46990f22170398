//! Uniform time grids on `[0, T]`: high-order differentiation, quadrature,
//! and exponentially weighted Duhamel integrals.
//!
//! Derivatives use 7-point Lagrange stencils (centered in the interior,
//! shifted at the ends), so they are exact for polynomials of degree 6.
//! Integrals integrate the local cubic interpolant of the integrand on each
//! interval; the Duhamel kernel `e^{-λ(t-τ)}` is integrated exactly against
//! that cubic, which keeps the error uniform in `λT`.

use num_complex::Complex64;

use crate::error::{LabError, Result};

const STENCIL: usize = 7;
const CUBIC: usize = 4;

/// `[0, T]` split into `M` equal intervals, nodes `t_j = jT/M`, `j = 0..=M`.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    length: f64,
    intervals: usize,
    /// `diff[r]` holds weights for the row type `r` (see [`TimeGrid::derivative`]).
    diff: [[f64; STENCIL]; STENCIL],
    /// Monomial coefficients of the cubic Lagrange basis for the first,
    /// interior and last interval stencils.
    cubic: [[[f64; CUBIC]; CUBIC]; 3],
    weights: Vec<f64>,
}

pub const MIN_INTERVALS: usize = 8;

impl TimeGrid {
    pub fn new(length: f64, intervals: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(LabError::InvalidParameter(format!(
                "cylinder length must be positive, got {length}"
            )));
        }
        if intervals < MIN_INTERVALS {
            return Err(LabError::GridTooSmall {
                need: MIN_INTERVALS,
                got: intervals,
            });
        }
        let nodes: Vec<f64> = (0..STENCIL).map(|k| k as f64).collect();
        let mut diff = [[0.0; STENCIL]; STENCIL];
        for (r, row) in diff.iter_mut().enumerate() {
            *row = derivative_weights(&nodes, r);
        }
        let cubic = [
            lagrange_monomials(&[0.0, 1.0, 2.0, 3.0]),
            lagrange_monomials(&[-1.0, 0.0, 1.0, 2.0]),
            lagrange_monomials(&[-2.0, -1.0, 0.0, 1.0]),
        ];
        let mut grid = Self {
            length,
            intervals,
            diff,
            cubic,
            weights: Vec::new(),
        };
        let h = grid.step();
        let mut weights = vec![0.0; intervals + 1];
        let plain = grid.interval_weights(0.0);
        for i in 0..intervals {
            let (kind, start) = grid.interval_stencil(i);
            for k in 0..CUBIC {
                weights[start + k] += h * plain[kind][k];
            }
        }
        grid.weights = weights;
        Ok(grid)
    }

    pub fn length(&self) -> f64 {
        self.length
    }

    pub fn intervals(&self) -> usize {
        self.intervals
    }

    pub fn nodes(&self) -> usize {
        self.intervals + 1
    }

    pub fn step(&self) -> f64 {
        self.length / self.intervals as f64
    }

    pub fn time(&self, j: usize) -> f64 {
        self.length * j as f64 / self.intervals as f64
    }

    /// Quadrature weights for `∫₀ᵀ f dt`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn integrate(&self, f: &[f64]) -> f64 {
        self.weights.iter().zip(f).map(|(w, v)| w * v).sum()
    }

    /// Stencil type and first node of the cubic used on interval `i`.
    fn interval_stencil(&self, i: usize) -> (usize, usize) {
        if i == 0 {
            (0, 0)
        } else if i + 1 == self.intervals {
            (2, self.intervals - 3)
        } else {
            (1, i - 1)
        }
    }

    /// Row type and first node of the derivative stencil at node `j`.
    fn row_stencil(&self, j: usize) -> (usize, usize) {
        let m = self.intervals;
        if j < 3 {
            (j, 0)
        } else if j + 3 > m {
            (STENCIL - 1 - (m - j), m + 1 - STENCIL)
        } else {
            (3, j - 3)
        }
    }

    /// `∫₀¹ e^{-z(1-σ)} ℓ_k(σ) dσ` for each stencil type and basis index.
    fn interval_weights(&self, z: f64) -> [[f64; CUBIC]; 3] {
        let m = exp_moments(z);
        let mut out = [[0.0; CUBIC]; 3];
        for (kind, basis) in self.cubic.iter().enumerate() {
            for (k, coeffs) in basis.iter().enumerate() {
                out[kind][k] = coeffs.iter().zip(&m).map(|(c, mp)| c * mp).sum();
            }
        }
        out
    }

    /// `f'` at every node.
    pub fn derivative(&self, f: &[Complex64], out: &mut [Complex64]) {
        debug_assert!(f.len() == self.nodes() && out.len() == self.nodes());
        let inv_h = 1.0 / self.step();
        for (j, o) in out.iter_mut().enumerate() {
            let (row, start) = self.row_stencil(j);
            // Differences against f_j make constants differentiate to exactly 0.
            let mut acc = Complex64::new(0.0, 0.0);
            for (w, v) in self.diff[row].iter().zip(&f[start..start + STENCIL]) {
                acc += (v - f[j]) * *w;
            }
            *o = acc * inv_h;
        }
    }

    /// Transpose of [`TimeGrid::derivative`] as a matrix on node values.
    pub fn derivative_transpose(&self, y: &[Complex64], out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
        let inv_h = 1.0 / self.step();
        for (j, v) in y.iter().enumerate() {
            let (row, start) = self.row_stencil(j);
            for (k, w) in self.diff[row].iter().enumerate() {
                out[start + k] += v * (w * inv_h);
            }
        }
    }

    /// Solves `u' + λu = g` with the APS-style end condition: `u(0) = 0` when
    /// `λ ≥ 0`, `u(T) = 0` when `λ < 0`.
    pub fn duhamel(&self, lambda: f64, g: &[Complex64], out: &mut [Complex64]) {
        debug_assert!(g.len() == self.nodes() && out.len() == self.nodes());
        if lambda >= 0.0 {
            self.duhamel_forward(lambda * self.step(), g, out);
        } else {
            let rev: Vec<Complex64> = g.iter().rev().copied().collect();
            self.duhamel_forward(-lambda * self.step(), &rev, out);
            out.reverse();
            out.iter_mut().for_each(|v| *v = -*v);
        }
    }

    fn duhamel_forward(&self, z: f64, g: &[Complex64], out: &mut [Complex64]) {
        let h = self.step();
        let decay = (-z).exp();
        let w = self.interval_weights(z);
        out[0] = Complex64::new(0.0, 0.0);
        for i in 0..self.intervals {
            let (kind, start) = self.interval_stencil(i);
            let mut acc = out[i] * decay;
            for k in 0..CUBIC {
                acc += g[start + k] * (h * w[kind][k]);
            }
            out[i + 1] = acc;
        }
    }

    /// Transpose of [`TimeGrid::duhamel`] as a matrix on node values.
    pub fn duhamel_transpose(&self, lambda: f64, y: &[Complex64], out: &mut [Complex64]) {
        if lambda >= 0.0 {
            self.duhamel_forward_transpose(lambda * self.step(), y, out);
        } else {
            let rev: Vec<Complex64> = y.iter().rev().copied().collect();
            self.duhamel_forward_transpose(-lambda * self.step(), &rev, out);
            out.reverse();
            out.iter_mut().for_each(|v| *v = -*v);
        }
    }

    fn duhamel_forward_transpose(&self, z: f64, y: &[Complex64], out: &mut [Complex64]) {
        let h = self.step();
        let decay = (-z).exp();
        let w = self.interval_weights(z);
        out.fill(Complex64::new(0.0, 0.0));
        let mut adj = Complex64::new(0.0, 0.0);
        for i in (0..self.intervals).rev() {
            adj = y[i + 1] + adj * decay;
            let (kind, start) = self.interval_stencil(i);
            for k in 0..CUBIC {
                out[start + k] += adj * (h * w[kind][k]);
            }
        }
    }
}

/// `L_k'(x_p)` for the Lagrange basis on `nodes`.
fn derivative_weights(nodes: &[f64], p: usize) -> [f64; STENCIL] {
    let prod = |k: usize| -> f64 {
        nodes
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != k)
            .map(|(_, x)| nodes[k] - x)
            .product()
    };
    let mut w = [0.0; STENCIL];
    for k in 0..nodes.len() {
        w[k] = if k == p {
            nodes
                .iter()
                .enumerate()
                .filter(|&(m, _)| m != p)
                .map(|(_, x)| 1.0 / (nodes[p] - x))
                .sum()
        } else {
            prod(p) / (prod(k) * (nodes[p] - nodes[k]))
        };
    }
    w
}

/// Monomial coefficients (in `σ`) of the Lagrange basis on `nodes`.
fn lagrange_monomials(nodes: &[f64; CUBIC]) -> [[f64; CUBIC]; CUBIC] {
    let mut out = [[0.0; CUBIC]; CUBIC];
    for (k, row) in out.iter_mut().enumerate() {
        let mut poly = vec![1.0];
        let mut denom = 1.0;
        for (m, x) in nodes.iter().enumerate() {
            if m == k {
                continue;
            }
            let mut next = vec![0.0; poly.len() + 1];
            for (i, c) in poly.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= c * x;
            }
            poly = next;
            denom *= nodes[k] - x;
        }
        for (r, c) in row.iter_mut().zip(poly) {
            *r = c / denom;
        }
    }
    out
}

/// `m_p(z) = ∫₀¹ e^{-z(1-σ)} σ^p dσ` for `p = 0..3`, `z ≥ 0`.
pub fn exp_moments(z: f64) -> [f64; CUBIC] {
    let mut m = [0.0; CUBIC];
    if z < 1.0 {
        for (p, mp) in m.iter_mut().enumerate() {
            // Σ_k (-z)^k p!/(k+p+1)!
            let mut term = 1.0 / (p + 1) as f64;
            let mut sum = term;
            for k in 1..40 {
                term *= -z / (k + p + 1) as f64;
                sum += term;
                if term.abs() < 1e-18 * sum.abs() {
                    break;
                }
            }
            *mp = sum;
        }
    } else {
        m[0] = -(-z).exp_m1() / z;
        for p in 1..CUBIC {
            m[p] = (1.0 - p as f64 * m[p - 1]) / z;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    fn real(v: &[f64]) -> Vec<Complex64> {
        v.iter().map(|x| Complex64::new(*x, 0.0)).collect()
    }

    #[test]
    fn rejects_coarse_grids() {
        assert!(TimeGrid::new(1.0, 7).is_err());
        assert!(TimeGrid::new(0.0, 16).is_err());
    }

    #[test]
    fn derivative_exact_on_sextics() {
        let grid = TimeGrid::new(0.7, 12).unwrap();
        let f: Vec<f64> = (0..=12).map(|j| grid.time(j).powi(6) - 2.0 * grid.time(j)).collect();
        let mut d = vec![Complex64::new(0.0, 0.0); 13];
        grid.derivative(&real(&f), &mut d);
        for (j, v) in d.iter().enumerate() {
            let t = grid.time(j);
            assert!((v.re - (6.0 * t.powi(5) - 2.0)).abs() < 1e-10);
        }
    }

    #[test]
    fn quadrature_exact_on_cubics() {
        let grid = TimeGrid::new(2.0, 9).unwrap();
        let f: Vec<f64> = (0..=9).map(|j| grid.time(j).powi(3)).collect();
        assert!((grid.integrate(&f) - 4.0).abs() < 1e-13);
        assert!(grid.weights().iter().all(|w| *w > 0.0));
    }

    #[test]
    fn duhamel_constant_forcing() {
        let grid = TimeGrid::new(1.0, 16).unwrap();
        let g = real(&[1.0; 17]);
        let mut u = vec![Complex64::new(0.0, 0.0); 17];
        grid.duhamel(2.0, &g, &mut u);
        for (j, v) in u.iter().enumerate() {
            let t = grid.time(j);
            assert!((v.re - (1.0 - (-2.0 * t).exp()) / 2.0).abs() < 1e-14);
        }
        grid.duhamel(-3.0, &g, &mut u);
        for (j, v) in u.iter().enumerate() {
            let t = grid.time(j);
            // u' - 3u = 1, u(1) = 0
            let exact = ((3.0 * (t - 1.0)).exp() - 1.0) / 3.0;
            assert!((v.re - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn moments_continuous_across_branch() {
        let lo = exp_moments(1.0 - 1e-12);
        let hi = exp_moments(1.0);
        for (a, b) in lo.iter().zip(&hi) {
            assert!((a - b).abs() < 1e-11);
        }
        let zero = exp_moments(0.0);
        assert_eq!(zero, [1.0, 0.5, 1.0 / 3.0, 0.25]);
    }

    #[test]
    fn transposes_match_dot_products() {
        let grid = TimeGrid::new(0.3, 10).unwrap();
        let x: Vec<Complex64> = (0..11).map(|j| Complex64::new((j as f64).sin(), 0.0)).collect();
        let y: Vec<Complex64> = (0..11).map(|j| Complex64::new((j as f64 * 0.7).cos(), 0.0)).collect();
        let dot = |a: &[Complex64], b: &[Complex64]| a.iter().zip(b).map(|(p, q)| p.re * q.re).sum::<f64>();
        let mut ax = vec![Complex64::new(0.0, 0.0); 11];
        let mut aty = vec![Complex64::new(0.0, 0.0); 11];
        for lambda in [5.0, 0.0, -7.0] {
            grid.duhamel(lambda, &x, &mut ax);
            grid.duhamel_transpose(lambda, &y, &mut aty);
            assert!((dot(&ax, &y) - dot(&x, &aty)).abs() < 1e-13);
        }
        grid.derivative(&x, &mut ax);
        grid.derivative_transpose(&y, &mut aty);
        assert!((dot(&ax, &y) - dot(&x, &aty)).abs() < 1e-11);
    }
}
