//! Truncated Fourier loops `S¹ → ℂ^d`.
//!
//! A loop is stored as its coefficients `c_n`, `n ∈ [-N, N]`, each a complex
//! `d`-vector, with `γ(θ) = Σ_n c_n e^{inθ}`. The circle carries the
//! normalized measure `dθ/2π`, so the `L²` norm is the plain `ℓ²` norm of the
//! coefficients.
//!
//! Spectral conventions used throughout the crate:
//!
//! * `J` is multiplication by `i` on `ℂ^d`;
//! * `-J∂_θ` has eigenvalue `n` on mode `n`;
//! * `L = J∂_θ` has eigenvalue `λ_n = -n` on mode `n`;
//! * the polarization `Π⁺` keeps `n > 0`, `Π⁻` keeps `n ≤ 0`;
//! * the APS projection `Π⁺_L` keeps `λ_n ≥ 0` (`n ≤ 0`), `Π⁻_L` keeps `n > 0`.

use std::cell::RefCell;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rustfft::{Fft, FftPlanner};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{LabError, Result};

/// Complex dimension and mode cutoff of a loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shape {
    pub dim: usize,
    pub cutoff: usize,
}

impl Shape {
    pub fn new(dim: usize, cutoff: usize) -> Result<Self> {
        if dim == 0 || cutoff == 0 {
            return Err(LabError::InvalidParameter(format!(
                "dimension and cutoff must be positive (d={dim}, N={cutoff})"
            )));
        }
        Ok(Self { dim, cutoff })
    }

    pub fn modes(&self) -> usize {
        2 * self.cutoff + 1
    }

    /// Number of complex coefficients, `(2N+1)·d`.
    pub fn len(&self) -> usize {
        self.modes() * self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Default pseudo-spectral grid, `4N` points.
    pub fn theta_grid(&self) -> usize {
        4 * self.cutoff
    }

    pub fn mode_range(&self) -> std::ops::RangeInclusive<i64> {
        let n = self.cutoff as i64;
        -n..=n
    }

    pub(crate) fn index(&self, n: i64, coord: usize) -> usize {
        debug_assert!(n.unsigned_abs() as usize <= self.cutoff && coord < self.dim);
        ((n + self.cutoff as i64) as usize) * self.dim + coord
    }

    pub(crate) fn check_same(&self, other: &Shape) -> Result<()> {
        if self != other {
            return Err(LabError::ShapeMismatch {
                expected_dim: self.dim,
                expected_cutoff: self.cutoff,
                dim: other.dim,
                cutoff: other.cutoff,
            });
        }
        Ok(())
    }
}

/// Sobolev exponents supported by [`Loop::sobolev_norm`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SobolevOrder {
    #[serde(rename = "0")]
    Zero,
    #[serde(rename = "1/2")]
    Half,
    #[serde(rename = "1")]
    One,
}

impl SobolevOrder {
    /// Weight multiplying `|c_n|²` in the squared norm.
    pub fn weight(self, n: i64) -> f64 {
        match self {
            SobolevOrder::Zero => 1.0,
            SobolevOrder::Half => {
                if n == 0 {
                    1.0
                } else {
                    n.unsigned_abs() as f64
                }
            }
            SobolevOrder::One => 1.0 + (n * n) as f64,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sector {
    Plus,
    Minus,
}

/// The fixed spectral convention, recorded verbatim in every report.
#[derive(Debug, Clone, Serialize)]
pub struct SpectralConvention {
    pub angular_measure: &'static str,
    pub minus_j_dtheta_eigenvalue: &'static str,
    pub l_eigenvalue: &'static str,
    pub complex_structure: &'static str,
    pub polarization: &'static str,
    pub aps_projection: &'static str,
    pub zero_mode_half_norm_weight: &'static str,
}

impl Default for SpectralConvention {
    fn default() -> Self {
        Self {
            angular_measure: "normalized dθ/2π",
            minus_j_dtheta_eigenvalue: "n on mode n",
            l_eigenvalue: "λ_n = -n for L = J∂_θ",
            complex_structure: "J = multiplication by i",
            polarization: "Π⁺: n > 0, Π⁻: n ≤ 0",
            aps_projection: "Π⁺_L: λ_n ≥ 0 (n ≤ 0), Π⁻_L: λ_n < 0 (n > 0)",
            zero_mode_half_norm_weight: "+|c_0|²",
        }
    }
}

/// Eigenvalue of `L = J∂_θ` on mode `n`.
pub fn l_eigenvalue(n: i64) -> f64 {
    -(n as f64)
}

/// Point values of a loop (or any `ℂ^d`-valued function) on the uniform grid
/// `θ_j = 2πj/M`, stored point-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Samples {
    dim: usize,
    values: Vec<Complex64>,
}

impl Samples {
    pub fn new(dim: usize, values: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || !values.len().is_multiple_of(dim) {
            return Err(LabError::InvalidParameter(format!(
                "{} sample values do not split into points of dimension {dim}",
                values.len()
            )));
        }
        Ok(Self { dim, values })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn point(&self, j: usize) -> &[Complex64] {
        &self.values[j * self.dim..(j + 1) * self.dim]
    }

    pub fn points(&self) -> std::slice::ChunksExact<'_, Complex64> {
        self.values.chunks_exact(self.dim)
    }

    pub fn points_mut(&mut self) -> std::slice::ChunksExactMut<'_, Complex64> {
        self.values.chunks_exact_mut(self.dim)
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Applies `f` pointwise, producing a new sample set of the same size.
    pub fn map_points<F>(&self, mut f: F) -> Samples
    where
        F: FnMut(&[Complex64], &mut [Complex64]),
    {
        let mut out = vec![Complex64::new(0.0, 0.0); self.values.len()];
        for (x, y) in self.points().zip(out.chunks_exact_mut(self.dim)) {
            f(x, y);
        }
        Samples {
            dim: self.dim,
            values: out,
        }
    }
}

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

fn plan(len: usize, inverse: bool) -> Arc<dyn Fft<f64>> {
    PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        if inverse {
            p.plan_fft_inverse(len)
        } else {
            p.plan_fft_forward(len)
        }
    })
}

/// A loop `S¹ → ℂ^d` truncated to modes `|n| ≤ N`.
#[derive(Clone, PartialEq)]
pub struct Loop {
    shape: Shape,
    coeffs: Vec<Complex64>,
}

impl fmt::Debug for Loop {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Loop")
            .field("d", &self.shape.dim)
            .field("N", &self.shape.cutoff)
            .field("l2", &self.sobolev_norm(SobolevOrder::Zero))
            .finish()
    }
}

impl Loop {
    pub fn zeros(shape: Shape) -> Self {
        Self {
            shape,
            coeffs: vec![Complex64::new(0.0, 0.0); shape.len()],
        }
    }

    /// Builds a loop from mode-major coefficients ordered `n = -N..N`.
    pub fn from_coeffs(shape: Shape, coeffs: Vec<Complex64>) -> Result<Self> {
        if coeffs.len() != shape.len() {
            return Err(LabError::InvalidParameter(format!(
                "expected {} coefficients for d={}, N={}, got {}",
                shape.len(),
                shape.dim,
                shape.cutoff,
                coeffs.len()
            )));
        }
        if coeffs.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(LabError::InvalidParameter(
                "loop coefficients must be finite".into(),
            ));
        }
        Ok(Self { shape, coeffs })
    }

    /// `value · e^{inθ}` in coordinate `coord`.
    pub fn single_mode(shape: Shape, n: i64, coord: usize, value: Complex64) -> Result<Self> {
        if n.unsigned_abs() as usize > shape.cutoff || coord >= shape.dim {
            return Err(LabError::InvalidParameter(format!(
                "mode {n}, coordinate {coord} outside d={}, N={}",
                shape.dim, shape.cutoff
            )));
        }
        let mut out = Self::zeros(shape);
        out.coeffs[shape.index(n, coord)] = value;
        Ok(out)
    }

    /// Independent complex Gaussian coefficients scaled by `(1+|n|)^{-decay}`.
    pub fn random<R: Rng + ?Sized>(shape: Shape, decay: f64, rng: &mut R) -> Self {
        let mut out = Self::zeros(shape);
        for n in shape.mode_range() {
            let scale = (1.0 + n.unsigned_abs() as f64).powf(-decay);
            for i in 0..shape.dim {
                let re: f64 = rng.sample(StandardNormal);
                let im: f64 = rng.sample(StandardNormal);
                out.coeffs[shape.index(n, i)] = Complex64::new(re, im) * scale;
            }
        }
        out
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn dim(&self) -> usize {
        self.shape.dim
    }

    pub fn cutoff(&self) -> usize {
        self.shape.cutoff
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<Complex64> {
        self.coeffs
    }

    /// Coefficient vector `c_n`.
    pub fn mode(&self, n: i64) -> &[Complex64] {
        let start = self.shape.index(n, 0);
        &self.coeffs[start..start + self.shape.dim]
    }

    pub fn mode_mut(&mut self, n: i64) -> &mut [Complex64] {
        let start = self.shape.index(n, 0);
        let d = self.shape.dim;
        &mut self.coeffs[start..start + d]
    }

    /// Iterates `(n, c_n)` over `n = -N..N`.
    pub fn modes(&self) -> impl Iterator<Item = (i64, &[Complex64])> + '_ {
        self.shape
            .mode_range()
            .zip(self.coeffs.chunks_exact(self.shape.dim))
    }

    pub fn modes_mut(&mut self) -> impl Iterator<Item = (i64, &mut [Complex64])> + '_ {
        self.shape
            .mode_range()
            .zip(self.coeffs.chunks_exact_mut(self.shape.dim))
    }

    /// `|c_n|²` summed over coordinates.
    pub fn mode_energy(&self, n: i64) -> f64 {
        self.mode(n).iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn add(&self, other: &Loop) -> Result<Loop> {
        self.shape.check_same(&other.shape)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a + b)
            .collect();
        Ok(Loop {
            shape: self.shape,
            coeffs,
        })
    }

    pub fn sub(&self, other: &Loop) -> Result<Loop> {
        self.shape.check_same(&other.shape)?;
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| a - b)
            .collect();
        Ok(Loop {
            shape: self.shape,
            coeffs,
        })
    }

    pub fn scaled(&self, factor: f64) -> Loop {
        Loop {
            shape: self.shape,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    pub fn scaled_complex(&self, factor: Complex64) -> Loop {
        Loop {
            shape: self.shape,
            coeffs: self.coeffs.iter().map(|c| c * factor).collect(),
        }
    }

    /// `self += a · x`.
    pub fn axpy(&mut self, a: f64, x: &Loop) -> Result<()> {
        self.shape.check_same(&x.shape)?;
        for (s, v) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *s += v * a;
        }
        Ok(())
    }

    pub fn sobolev_norm(&self, order: SobolevOrder) -> f64 {
        self.modes()
            .map(|(n, c)| order.weight(n) * c.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .sum::<f64>()
            .sqrt()
    }

    /// Real inner product inducing [`Loop::sobolev_norm`].
    pub fn inner(&self, other: &Loop, order: SobolevOrder) -> Result<f64> {
        self.shape.check_same(&other.shape)?;
        Ok(self
            .modes()
            .zip(other.modes())
            .map(|((n, a), (_, b))| {
                order.weight(n) * a.iter().zip(b).map(|(x, y)| (x.conj() * y).re).sum::<f64>()
            })
            .sum())
    }

    /// Polarization `Π^±` of `-J∂_θ`: plus keeps `n > 0`, minus keeps `n ≤ 0`.
    pub fn project(&self, sector: Sector) -> Loop {
        self.keep(|n| match sector {
            Sector::Plus => n > 0,
            Sector::Minus => n <= 0,
        })
    }

    /// APS projection `Π^±_L` of `L = J∂_θ`: plus keeps `λ_n ≥ 0`, minus `λ_n < 0`.
    pub fn aps_project(&self, sector: Sector) -> Loop {
        self.keep(|n| match sector {
            Sector::Plus => l_eigenvalue(n) >= 0.0,
            Sector::Minus => l_eigenvalue(n) < 0.0,
        })
    }

    fn keep<F: Fn(i64) -> bool>(&self, keep: F) -> Loop {
        let mut out = self.clone();
        for (n, c) in out.modes_mut() {
            if !keep(n) {
                c.fill(Complex64::new(0.0, 0.0));
            }
        }
        out
    }

    /// `∂_θ γ`, i.e. `c_n ↦ i n c_n`.
    pub fn d_theta(&self) -> Loop {
        let mut out = self.clone();
        for (n, c) in out.modes_mut() {
            let f = Complex64::new(0.0, n as f64);
            c.iter_mut().for_each(|z| *z *= f);
        }
        out
    }

    /// Largest coefficient-wise distance to `other`.
    pub fn max_abs_diff(&self, other: &Loop) -> Result<f64> {
        self.shape.check_same(&other.shape)?;
        Ok(self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Coefficient-wise equality within `tol`.
    pub fn approx_eq(&self, other: &Loop, tol: f64) -> bool {
        self.max_abs_diff(other).is_ok_and(|d| d <= tol)
    }

    /// Evaluates `γ(θ_j)` at `θ_j = 2πj/M`.
    pub fn sample(&self, grid: usize) -> Result<Samples> {
        check_grid(self.shape.cutoff, grid)?;
        let d = self.shape.dim;
        let fft = plan(grid, true);
        let mut values = vec![Complex64::new(0.0, 0.0); grid * d];
        let mut buf = vec![Complex64::new(0.0, 0.0); grid];
        for i in 0..d {
            buf.fill(Complex64::new(0.0, 0.0));
            for (n, c) in self.modes() {
                buf[n.rem_euclid(grid as i64) as usize] = c[i];
            }
            fft.process(&mut buf);
            for (j, v) in buf.iter().enumerate() {
                values[j * d + i] = *v;
            }
        }
        Ok(Samples { dim: d, values })
    }

    /// Fourier coefficients of point samples, truncated to `|n| ≤ N`.
    pub fn synthesize(samples: &Samples, cutoff: usize) -> Result<Loop> {
        let grid = samples.len();
        check_grid(cutoff, grid)?;
        let shape = Shape::new(samples.dim, cutoff)?;
        let d = shape.dim;
        let fft = plan(grid, false);
        let mut out = Loop::zeros(shape);
        let mut buf = vec![Complex64::new(0.0, 0.0); grid];
        let inv = 1.0 / grid as f64;
        for i in 0..d {
            for (j, b) in buf.iter_mut().enumerate() {
                *b = samples.values[j * d + i];
            }
            fft.process(&mut buf);
            for (n, c) in out.modes_mut() {
                c[i] = buf[n.rem_euclid(grid as i64) as usize] * inv;
            }
        }
        Ok(out)
    }
}

fn check_grid(cutoff: usize, grid: usize) -> Result<()> {
    let need = 2 * cutoff + 2;
    if grid < need {
        return Err(LabError::GridTooSmall { need, got: grid });
    }
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct LoopRepr {
    d: usize,
    #[serde(rename = "N")]
    n: usize,
    coeffs: Vec<Vec<[f64; 2]>>,
}

impl Serialize for Loop {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        LoopRepr {
            d: self.shape.dim,
            n: self.shape.cutoff,
            coeffs: self
                .coeffs
                .chunks_exact(self.shape.dim)
                .map(|c| c.iter().map(|z| [z.re, z.im]).collect())
                .collect(),
        }
        .serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Loop {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Self, D::Error> {
        let repr = LoopRepr::deserialize(deserializer)?;
        let shape = Shape::new(repr.d, repr.n).map_err(de::Error::custom)?;
        if repr.coeffs.len() != shape.modes() || repr.coeffs.iter().any(|c| c.len() != shape.dim)
        {
            return Err(de::Error::custom(format!(
                "coeffs must be {} entries of {} [re, im] pairs",
                shape.modes(),
                shape.dim
            )));
        }
        let coeffs = repr
            .coeffs
            .iter()
            .flatten()
            .map(|[re, im]| Complex64::new(*re, *im))
            .collect();
        Loop::from_coeffs(shape, coeffs).map_err(de::Error::custom)
    }
}
