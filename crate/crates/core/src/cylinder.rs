//! Fields on the cylinder `[0, T] × S¹`, modal in `θ` and nodal in `t`, with
//! `D = ∂_t + L`, its APS inverses and the cylinder energy.
//!
//! Values are stored node-major: entry `(j, n, i)` lives at
//! `(j·(2N+1) + n + N)·d + i`, so every time slice is a contiguous loop.

use std::io::Write;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};
use crate::hamiltonian::{norm_sqr, HamiltonianModel};
use crate::loopspace::{l_eigenvalue, Loop, Sector, Shape, SobolevOrder};
use crate::timegrid::TimeGrid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CylinderNorm {
    L2,
    L2_1,
    L4,
}

/// Mixed APS data `β = β⁺₀ + β⁻_ε`: modes `n ≤ 0` prescribed at `t = 0`,
/// modes `n > 0` prescribed at `t = T`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryData {
    pub beta_plus0: Loop,
    pub beta_minus_eps: Loop,
}

impl BoundaryData {
    pub fn new(beta_plus0: Loop, beta_minus_eps: Loop) -> Result<Self> {
        beta_plus0.shape().check_same(&beta_minus_eps.shape())?;
        if beta_plus0.aps_project(Sector::Minus).sobolev_norm(SobolevOrder::Zero) != 0.0
            || beta_minus_eps.aps_project(Sector::Plus).sobolev_norm(SobolevOrder::Zero) != 0.0
        {
            return Err(LabError::InvalidParameter(
                "boundary data must be supported on n <= 0 at t = 0 and n > 0 at t = T".into(),
            ));
        }
        Ok(Self {
            beta_plus0,
            beta_minus_eps,
        })
    }

    pub fn zeros(shape: Shape) -> Self {
        Self {
            beta_plus0: Loop::zeros(shape),
            beta_minus_eps: Loop::zeros(shape),
        }
    }

    /// Splits a loop by the sign of the spectrum of `L`.
    pub fn decompose(b: &Loop) -> Self {
        Self {
            beta_plus0: b.aps_project(Sector::Plus),
            beta_minus_eps: b.aps_project(Sector::Minus),
        }
    }

    pub fn combine(&self) -> Loop {
        self.beta_plus0
            .add(&self.beta_minus_eps)
            .expect("boundary components share a shape")
    }

    pub fn shape(&self) -> Shape {
        self.beta_plus0.shape()
    }

    pub fn norm(&self) -> f64 {
        self.combine().sobolev_norm(SobolevOrder::Half)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CylinderMap {
    shape: Shape,
    grid: TimeGrid,
    values: Vec<Complex64>,
}

impl CylinderMap {
    pub fn zeros(shape: Shape, grid: &TimeGrid) -> Self {
        Self {
            shape,
            grid: grid.clone(),
            values: vec![Complex64::new(0.0, 0.0); shape.len() * grid.nodes()],
        }
    }

    /// Builds a field from `f(t, n, coord)`.
    pub fn from_fn<F>(shape: Shape, grid: &TimeGrid, mut f: F) -> Self
    where
        F: FnMut(f64, i64, usize) -> Complex64,
    {
        let mut out = Self::zeros(shape, grid);
        for j in 0..grid.nodes() {
            let t = grid.time(j);
            for n in shape.mode_range() {
                for i in 0..shape.dim {
                    let idx = out.index(j, n, i);
                    out.values[idx] = f(t, n, i);
                }
            }
        }
        out
    }

    /// The same loop at every node.
    pub fn constant(gamma: &Loop, grid: &TimeGrid) -> Self {
        let mut out = Self::zeros(gamma.shape(), grid);
        for node in out.values.chunks_exact_mut(gamma.shape().len()) {
            node.copy_from_slice(gamma.coeffs());
        }
        out
    }

    /// Smooth random field: per mode and coordinate a trigonometric
    /// polynomial of degree `degree` in `πt/T`, scaled by `(1+|n|)^{-decay}`.
    pub fn random_smooth<R: Rng + ?Sized>(
        shape: Shape,
        grid: &TimeGrid,
        degree: usize,
        decay: f64,
        rng: &mut R,
    ) -> Self {
        let mut out = Self::zeros(shape, grid);
        let mut gauss = || {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im)
        };
        let w = std::f64::consts::PI / grid.length();
        for n in shape.mode_range() {
            let scale = (1.0 + n.unsigned_abs() as f64).powf(-decay);
            for i in 0..shape.dim {
                let a: Vec<Complex64> = (0..=degree).map(|_| gauss()).collect();
                let b: Vec<Complex64> = (0..=degree).map(|_| gauss()).collect();
                let series: Vec<Complex64> = (0..grid.nodes())
                    .map(|j| {
                        let t = grid.time(j);
                        (0..=degree)
                            .map(|k| {
                                let x = w * k as f64 * t;
                                a[k] * x.cos() + b[k] * x.sin()
                            })
                            .sum::<Complex64>()
                            * scale
                    })
                    .collect();
                out.set_series(n, i, &series);
            }
        }
        out
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.grid
    }

    pub fn length(&self) -> f64 {
        self.grid.length()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn index(&self, j: usize, n: i64, i: usize) -> usize {
        j * self.shape.len() + self.shape.index(n, i)
    }

    pub fn value(&self, j: usize, n: i64, i: usize) -> Complex64 {
        self.values[self.index(j, n, i)]
    }

    /// The slice `u(t_j, ·)`.
    pub fn node(&self, j: usize) -> Loop {
        let len = self.shape.len();
        Loop::from_coeffs(self.shape, self.values[j * len..(j + 1) * len].to_vec())
            .expect("node slices are well-formed loops")
    }

    pub fn first(&self) -> Loop {
        self.node(0)
    }

    pub fn last(&self) -> Loop {
        self.node(self.grid.intervals())
    }

    /// Time series of mode `n`, coordinate `i`.
    pub fn series(&self, n: i64, i: usize) -> Vec<Complex64> {
        (0..self.grid.nodes()).map(|j| self.value(j, n, i)).collect()
    }

    pub fn set_series(&mut self, n: i64, i: usize, series: &[Complex64]) {
        for (j, v) in series.iter().enumerate() {
            let idx = self.index(j, n, i);
            self.values[idx] = *v;
        }
    }

    /// Applies a per-series linear map `f(n, input, output)`.
    fn map_series<F>(&self, mut f: F) -> CylinderMap
    where
        F: FnMut(i64, &[Complex64], &mut [Complex64]),
    {
        let mut out = CylinderMap::zeros(self.shape, &self.grid);
        let mut buf = vec![Complex64::new(0.0, 0.0); self.grid.nodes()];
        for n in self.shape.mode_range() {
            for i in 0..self.shape.dim {
                f(n, &self.series(n, i), &mut buf);
                out.set_series(n, i, &buf);
            }
        }
        out
    }

    fn check_compatible(&self, other: &CylinderMap) -> Result<()> {
        self.shape.check_same(&other.shape)?;
        if self.grid != other.grid {
            return Err(LabError::InvalidParameter(format!(
                "time grids differ: (T={}, M_t={}) vs (T={}, M_t={})",
                self.length(),
                self.grid.intervals(),
                other.length(),
                other.grid.intervals()
            )));
        }
        Ok(())
    }

    pub fn add(&self, other: &CylinderMap) -> Result<CylinderMap> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a += b);
        Ok(out)
    }

    pub fn sub(&self, other: &CylinderMap) -> Result<CylinderMap> {
        self.check_compatible(other)?;
        let mut out = self.clone();
        out.values.iter_mut().zip(&other.values).for_each(|(a, b)| *a -= b);
        Ok(out)
    }

    pub fn scaled(&self, factor: f64) -> CylinderMap {
        let mut out = self.clone();
        out.values.iter_mut().for_each(|v| *v *= factor);
        out
    }

    /// Multiplies every node by `w(t)`.
    pub fn windowed<F: Fn(f64) -> f64>(&self, w: F) -> CylinderMap {
        let mut out = self.clone();
        let len = self.shape.len();
        for (j, node) in out.values.chunks_exact_mut(len).enumerate() {
            let f = w(self.grid.time(j));
            node.iter_mut().for_each(|v| *v *= f);
        }
        out
    }

    /// `∂_t u`.
    pub fn time_derivative(&self) -> CylinderMap {
        self.map_series(|_, u, out| self.grid.derivative(u, out))
    }

    /// `(Du)_n = u_n' + λ_n u_n`, `λ_n = -n`.
    pub fn apply_d(&self) -> CylinderMap {
        self.map_series(|n, u, out| {
            self.grid.derivative(u, out);
            let lambda = l_eigenvalue(n);
            for (o, v) in out.iter_mut().zip(u) {
                *o += v * lambda;
            }
        })
    }

    /// The right inverse `P` of `D` with vanishing APS boundary data.
    pub fn p_op(&self) -> CylinderMap {
        self.map_series(|n, g, out| self.grid.duhamel(l_eigenvalue(n), g, out))
    }

    /// `Q(β)`: the solution of `Du = 0` with APS data `β`.
    pub fn q_op(beta: &BoundaryData, grid: &TimeGrid) -> CylinderMap {
        let shape = beta.shape();
        let length = grid.length();
        CylinderMap::from_fn(shape, grid, |t, n, i| {
            let lambda = l_eigenvalue(n);
            if lambda >= 0.0 {
                -beta.beta_plus0.mode(n)[i] * (-lambda * t).exp()
            } else {
                beta.beta_minus_eps.mode(n)[i] * (-lambda * (t - length)).exp()
            }
        })
    }

    /// `β⁺₀ = −Π⁺_L u(0)`, `β⁻_ε = Π⁻_L u(T)`.
    pub fn aps_boundary(&self) -> BoundaryData {
        BoundaryData {
            beta_plus0: self.first().aps_project(Sector::Plus).scaled(-1.0),
            beta_minus_eps: self.last().aps_project(Sector::Minus),
        }
    }

    /// The complementary ends: `−Π⁺_L u(T)` and `Π⁻_L u(0)`.
    pub fn far_end_boundary(&self) -> BoundaryData {
        BoundaryData {
            beta_plus0: self.last().aps_project(Sector::Plus).scaled(-1.0),
            beta_minus_eps: self.first().aps_project(Sector::Minus),
        }
    }

    fn node_energies<F: Fn(&Loop) -> f64>(&self, f: F) -> Vec<f64> {
        (0..self.grid.nodes()).map(|j| f(&self.node(j))).collect()
    }

    pub fn norm(&self, which: CylinderNorm) -> f64 {
        match which {
            CylinderNorm::L2 => self
                .grid
                .integrate(&self.node_energies(|u| u.sobolev_norm(SobolevOrder::Zero).powi(2)))
                .sqrt(),
            CylinderNorm::L2_1 => {
                let space = self.node_energies(|u| u.sobolev_norm(SobolevOrder::One).powi(2));
                let dt = self
                    .time_derivative()
                    .node_energies(|u| u.sobolev_norm(SobolevOrder::Zero).powi(2));
                let sum: Vec<f64> = space.iter().zip(&dt).map(|(a, b)| a + b).collect();
                self.grid.integrate(&sum).sqrt()
            }
            CylinderNorm::L4 => {
                let grid = self.shape.theta_grid();
                let quartic = self.node_energies(|u| {
                    let s = u.sample(grid).expect("4N grid resolves N modes");
                    s.points().map(|p| norm_sqr(p).powi(2)).sum::<f64>() / grid as f64
                });
                self.grid.integrate(&quartic).powf(0.25)
            }
        }
    }

    /// Pseudo-spectral `∇H(u)` at every node.
    pub fn grad_h(&self, model: &HamiltonianModel) -> CylinderMap {
        let grid = self.shape.theta_grid();
        let mut out = CylinderMap::zeros(self.shape, &self.grid);
        let len = self.shape.len();
        for (j, node) in out.values.chunks_exact_mut(len).enumerate() {
            let g = model
                .grad_h_loop(&self.node(j), grid)
                .expect("4N grid resolves N modes");
            node.copy_from_slice(g.coeffs());
        }
        out
    }

    /// `½∫∫ |u_t|² + |u_θ − X_H(u)|²` with the normalized angular measure.
    pub fn energy(&self, model: &HamiltonianModel) -> f64 {
        let ut = self.time_derivative();
        let grad = self.grad_h(model);
        let density: Vec<f64> = (0..self.grid.nodes())
            .map(|j| {
                let kinetic = ut.node(j).sobolev_norm(SobolevOrder::Zero).powi(2);
                let u = self.node(j);
                let g = grad.node(j);
                // u_θ − X_H(u) = i(n u_n − (∇H)_n) mode by mode.
                let defect: f64 = u
                    .modes()
                    .zip(g.modes())
                    .map(|((n, a), (_, b))| {
                        a.iter()
                            .zip(b)
                            .map(|(x, y)| (x * n as f64 - y).norm_sqr())
                            .sum::<f64>()
                    })
                    .sum();
                kinetic + defect
            })
            .collect();
        0.5 * self.grid.integrate(&density)
    }

    /// Per-mode time series as CSV: `mode,t,re,im`, with a `coord` column
    /// inserted after `mode` when `d > 1`.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let multi = self.shape.dim > 1;
        if multi {
            w.write_record(["mode", "coord", "t", "re", "im"])?;
        } else {
            w.write_record(["mode", "t", "re", "im"])?;
        }
        for n in self.shape.mode_range() {
            for i in 0..self.shape.dim {
                for j in 0..self.grid.nodes() {
                    let v = self.value(j, n, i);
                    let t = self.grid.time(j);
                    if multi {
                        w.serialize((n, i, t, v.re, v.im))?;
                    } else {
                        w.serialize((n, t, v.re, v.im))?;
                    }
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct CylinderRepr {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "T")]
    t: f64,
    #[serde(rename = "M_t")]
    m_t: usize,
    /// `values[j][n + N][i] = [re, im]`.
    values: Vec<Vec<Vec<[f64; 2]>>>,
}

impl Serialize for CylinderMap {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let d = self.shape.dim;
        CylinderRepr {
            d,
            n: self.shape.cutoff,
            t: self.length(),
            m_t: self.grid.intervals(),
            values: self
                .values
                .chunks_exact(self.shape.len())
                .map(|node| {
                    node.chunks_exact(d)
                        .map(|c| c.iter().map(|z| [z.re, z.im]).collect())
                        .collect()
                })
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for CylinderMap {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = CylinderRepr::deserialize(deserializer)?;
        let shape = Shape::new(repr.d, repr.n).map_err(de::Error::custom)?;
        let grid = TimeGrid::new(repr.t, repr.m_t).map_err(de::Error::custom)?;
        let well_formed = repr.values.len() == grid.nodes()
            && repr.values.iter().all(|node| {
                node.len() == shape.modes() && node.iter().all(|c| c.len() == shape.dim)
            });
        if !well_formed {
            return Err(de::Error::custom(format!(
                "values must be {} nodes of {} modes of {} [re, im] pairs",
                grid.nodes(),
                shape.modes(),
                shape.dim
            )));
        }
        let values: Vec<Complex64> = repr
            .values
            .iter()
            .flatten()
            .flatten()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        if values.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(de::Error::custom("cylinder values must be finite"));
        }
        Ok(CylinderMap {
            shape,
            grid,
            values,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn shape(d: usize, n: usize) -> Shape {
        Shape::new(d, n).unwrap()
    }

    #[test]
    fn kernel_elements_are_annihilated() {
        let grid = TimeGrid::new(0.2, 64).unwrap();
        let s = shape(1, 4);
        let u = CylinderMap::from_fn(s, &grid, |t, n, _| c((n as f64 * t).exp(), 0.0));
        assert!(u.apply_d().norm(CylinderNorm::L2) < 1e-9);
        let zero_mode = CylinderMap::from_fn(s, &grid, |_, n, _| {
            if n == 0 {
                c(0.3, 0.4)
            } else {
                c(0.0, 0.0)
            }
        });
        assert!(zero_mode.apply_d().values().iter().all(|v| v.norm() < 1e-13));
    }

    #[test]
    fn q_op_closed_forms() {
        let eps = 0.1;
        let grid = TimeGrid::new(eps, 16).unwrap();
        let s = shape(1, 3);
        let beta = BoundaryData::decompose(&Loop::single_mode(s, -3, 0, c(1.0, 0.0)).unwrap());
        let q = CylinderMap::q_op(&beta, &grid);
        assert!((q.value(16, -3, 0) - c(-(-0.3f64).exp(), 0.0)).norm() < 1e-15);
        let beta = BoundaryData::decompose(&Loop::single_mode(s, 2, 0, c(1.0, 0.0)).unwrap());
        let q = CylinderMap::q_op(&beta, &grid);
        assert!((q.value(0, 2, 0) - c((-2.0 * eps).exp(), 0.0)).norm() < 1e-15);
    }

    #[test]
    fn aps_boundary_inverts_q() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s = shape(2, 6);
        let grid = TimeGrid::new(0.3, 32).unwrap();
        let b = Loop::random(s, 1.0, &mut rng);
        let beta = BoundaryData::decompose(&b);
        let back = CylinderMap::q_op(&beta, &grid).aps_boundary();
        assert!(back.combine().approx_eq(&b, 1e-15));
    }

    #[test]
    fn p_op_has_zero_boundary_and_inverts_d() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let s = shape(1, 8);
        let grid = TimeGrid::new(0.5, 256).unwrap();
        let g = CylinderMap::random_smooth(s, &grid, 3, 0.0, &mut rng);
        let u = g.p_op();
        assert!(u.aps_boundary().norm() < 1e-12);
        let err = u.apply_d().sub(&g).unwrap().norm(CylinderNorm::L2);
        assert!(err <= 1e-6 * g.norm(CylinderNorm::L2));
    }

    #[test]
    fn p_op_constant_forcing_closed_form() {
        let grid = TimeGrid::new(1.0, 32).unwrap();
        let s = shape(1, 2);
        let g = CylinderMap::from_fn(s, &grid, |_, n, _| if n == -2 { c(1.0, 0.0) } else { c(0.0, 0.0) });
        let u = g.p_op();
        for j in 0..=32 {
            let t = grid.time(j);
            assert!((u.value(j, -2, 0).re - (1.0 - (-2.0 * t).exp()) / 2.0).abs() < 1e-14);
        }
        assert_eq!(CylinderMap::zeros(s, &grid).p_op(), CylinderMap::zeros(s, &grid));
    }

    #[test]
    fn norms_of_simple_fields() {
        let grid = TimeGrid::new(0.7, 16).unwrap();
        let s = shape(1, 3);
        let v = c(0.6, -0.8);
        let u = CylinderMap::from_fn(s, &grid, |_, n, _| if n == 0 { v } else { c(0.0, 0.0) });
        assert!((u.norm(CylinderNorm::L2) - 0.7f64.sqrt()).abs() < 1e-14);
        assert!((u.norm(CylinderNorm::L4) - 0.7f64.powf(0.25)).abs() < 1e-14);
        let z = CylinderMap::zeros(s, &grid);
        for which in [CylinderNorm::L2, CylinderNorm::L2_1, CylinderNorm::L4] {
            assert_eq!(z.norm(which), 0.0);
        }
    }

    #[test]
    fn single_mode_norm_integrals() {
        // u = e^{t} e^{2iθ} on [0, 1]
        let grid = TimeGrid::new(1.0, 256).unwrap();
        let s = shape(1, 4);
        let u = CylinderMap::from_fn(s, &grid, |t, n, _| if n == 2 { c(t.exp(), 0.0) } else { c(0.0, 0.0) });
        let e2 = (2f64.exp() - 1.0) / 2.0;
        let rel = |a: f64, b: f64| (a - b).abs() / b;
        assert!(rel(u.norm(CylinderNorm::L2).powi(2), e2) < 1e-8);
        assert!(rel(u.norm(CylinderNorm::L2_1).powi(2), 6.0 * e2) < 1e-8);
        let e4 = (4f64.exp() - 1.0) / 4.0;
        assert!(rel(u.norm(CylinderNorm::L4).powi(4), e4) < 1e-8);
    }

    #[test]
    fn linear_flow_energy_closed_form() {
        let model = HamiltonianModel::default();
        let (n, alpha, t_len) = (3i64, 0.01, 0.5);
        let grid = TimeGrid::new(t_len, 256).unwrap();
        let s = shape(1, 4);
        let u = CylinderMap::from_fn(s, &grid, |t, m, _| {
            if m == n {
                c(alpha * (n as f64 * t).exp(), 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let exact = 0.5 * n as f64 * alpha * alpha * ((2.0 * n as f64 * t_len).exp() - 1.0);
        assert!((u.energy(&model) - exact).abs() <= 1e-8 * exact);
    }

    #[test]
    fn boundary_data_validation() {
        let s = shape(1, 2);
        let plus = Loop::single_mode(s, 1, 0, c(1.0, 0.0)).unwrap();
        assert!(BoundaryData::new(plus.clone(), Loop::zeros(s)).is_err());
        assert!(BoundaryData::new(Loop::zeros(s), plus).is_ok());
    }

    #[test]
    fn csv_and_json_layouts() {
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let s = shape(1, 1);
        let u = CylinderMap::from_fn(s, &grid, |t, n, _| c(t, n as f64));
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("mode,t,re,im"));
        assert_eq!(lines.next(), Some("-1,0.0,0.0,-1.0"));
        assert_eq!(text.lines().count(), 1 + 3 * 9);
        let json = serde_json::to_string(&u).unwrap();
        assert!(json.starts_with(r#"{"d":1,"N":1,"T":1.0,"M_t":8,"values":[[[[0.0,-1.0]]"#));
        let back: CylinderMap = serde_json::from_str(&json).unwrap();
        assert_eq!(back, u);
    }
}
