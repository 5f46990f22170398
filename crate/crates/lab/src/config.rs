//! Run configuration, read from JSON. Every field has a default, so `{}` is a
//! valid config.

use std::path::{Path, PathBuf};

use actionlab::{HamiltonianModel, Loop, Shape};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot parse config: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Picard step tolerance.
    pub solver: f64,
    /// Closed-form and quadrature identities.
    pub identity: f64,
    /// Gradient norm accepted as a critical point.
    pub gradient: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            solver: 1e-12,
            identity: 1e-6,
            gradient: 1e-8,
        }
    }
}

/// Sample counts for the randomized checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleCounts {
    pub sobolev_constant: usize,
    pub random_fields: usize,
    pub right_inverse: usize,
    pub gradient_pairs: usize,
    pub beta_starts: usize,
    pub descent_steps: usize,
    pub sigma_boundary: usize,
    pub perturbation: usize,
    pub lipschitz_pairs: usize,
    /// Extra log-spaced modes beyond `N` in the operator-norm sweep.
    pub spectral_window: usize,
}

impl Default for SampleCounts {
    fn default() -> Self {
        Self {
            sobolev_constant: 50,
            random_fields: 1000,
            right_inverse: 100,
            gradient_pairs: 100,
            beta_starts: 8,
            descent_steps: 200,
            sigma_boundary: 400,
            perturbation: 1000,
            lipschitz_pairs: 1000,
            spectral_window: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveCylinderSection {
    pub eps: f64,
    /// Loop whose APS components are the boundary data; `None` uses a
    /// three-mode default of `L²_{1/2}` norm about 0.08.
    pub boundary: Option<Loop>,
    pub max_iter: usize,
    pub write_csv: bool,
}

impl Default for SolveCylinderSection {
    fn default() -> Self {
        Self {
            eps: 0.01,
            boundary: None,
            max_iter: 500,
            write_csv: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlowSection {
    /// Start loop; `None` uses `α e^{iθ}` with `alpha`.
    pub initial: Option<Loop>,
    pub alpha: f64,
    #[serde(rename = "T")]
    pub t_end: f64,
    /// Step size; `None` uses `0.1/N`.
    pub dt: Option<f64>,
}

impl Default for FlowSection {
    fn default() -> Self {
        Self {
            initial: None,
            alpha: 1.45,
            t_end: 1.0,
            dt: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FindOrbitSection {
    /// Seed loop; `None` uses `(α/√k) e^{ikθ}`.
    pub seed: Option<Loop>,
    /// Radius of the seed; `None` runs the α scan.
    pub alpha: Option<f64>,
    pub winding: i64,
    pub flow_time: f64,
}

impl Default for FindOrbitSection {
    fn default() -> Self {
        Self {
            seed: None,
            alpha: None,
            winding: 1,
            flow_time: 2.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScanAlphaSection {
    /// Radii to scan; `None` uses `2^{k/8}`, `k = −8..8`.
    pub alphas: Option<Vec<f64>>,
}

impl ScanAlphaSection {
    pub fn grid(&self) -> Vec<f64> {
        self.alphas
            .clone()
            .unwrap_or_else(|| (-8..=8).map(|k| 2f64.powf(k as f64 / 8.0)).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CheckCyclesSection {
    /// `None` runs the α scan.
    pub alpha: Option<f64>,
    pub tau_start: f64,
    pub scan_resolution: usize,
    pub scan_directions: usize,
}

impl Default for CheckCyclesSection {
    fn default() -> Self {
        Self {
            alpha: None,
            tau_start: 1.0,
            scan_resolution: 64,
            scan_directions: 16,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub model: HamiltonianModel,
    pub d: usize,
    #[serde(rename = "N")]
    pub cutoff: usize,
    #[serde(rename = "M_t")]
    pub m_t: usize,
    /// Angular quadrature for action and gradient checks; `None` means `4N`.
    #[serde(rename = "M_theta")]
    pub m_theta: Option<usize>,
    pub eps_list: Vec<f64>,
    pub tolerances: Tolerances,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub samples: SampleCounts,
    pub solve_cylinder: SolveCylinderSection,
    pub flow: FlowSection,
    pub find_orbit: FindOrbitSection,
    pub scan_alpha: ScanAlphaSection,
    pub check_cycles: CheckCyclesSection,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            model: HamiltonianModel::default(),
            d: 1,
            cutoff: 32,
            m_t: 64,
            m_theta: None,
            eps_list: vec![1.0, 0.5, 0.1, 0.01, 0.001],
            tolerances: Tolerances::default(),
            seed: 20_240_601,
            output_dir: PathBuf::from("lab-out"),
            samples: SampleCounts::default(),
            solve_cylinder: SolveCylinderSection::default(),
            flow: FlowSection::default(),
            find_orbit: FindOrbitSection::default(),
            scan_alpha: ScanAlphaSection::default(),
            check_cycles: CheckCyclesSection::default(),
        }
    }
}

fn invalid(msg: impl Into<String>) -> ConfigError {
    ConfigError::Invalid(msg.into())
}

impl Config {
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let config: Config = serde_json::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn shape(&self) -> Shape {
        Shape::new(self.d, self.cutoff).expect("validated")
    }

    pub fn theta_grid(&self) -> usize {
        self.m_theta.unwrap_or(4 * self.cutoff)
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<(), ConfigError> {
        self.model
            .validate()
            .map_err(|e| invalid(format!("model: {e}")))?;
        if self.d == 0 || self.cutoff == 0 {
            return Err(invalid("d and N must be positive"));
        }
        if self.m_t < actionlab::timegrid::MIN_INTERVALS {
            return Err(invalid(format!(
                "M_t must be at least {}",
                actionlab::timegrid::MIN_INTERVALS
            )));
        }
        if self.theta_grid() < 2 * self.cutoff + 2 {
            return Err(invalid("M_theta must be at least 2N+2"));
        }
        if self.eps_list.is_empty() || self.eps_list.iter().any(|e| !(e.is_finite() && *e > 0.0)) {
            return Err(invalid("eps_list must be a nonempty list of positive lengths"));
        }
        let t = &self.tolerances;
        if [t.solver, t.identity, t.gradient]
            .iter()
            .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(invalid("every tolerance must be strictly positive"));
        }
        let loops = [
            ("solve_cylinder.boundary", &self.solve_cylinder.boundary),
            ("flow.initial", &self.flow.initial),
            ("find_orbit.seed", &self.find_orbit.seed),
        ];
        for (name, l) in loops {
            if let Some(l) = l {
                if l.shape() != self.shape() {
                    return Err(invalid(format!("{name} must have d = {}, N = {}", self.d, self.cutoff)));
                }
            }
        }
        if !(self.solve_cylinder.eps > 0.0) || self.solve_cylinder.max_iter == 0 {
            return Err(invalid("solve_cylinder needs eps > 0 and max_iter > 0"));
        }
        if !(self.flow.t_end >= 0.0) || self.flow.dt.is_some_and(|dt| !(dt > 0.0)) {
            return Err(invalid("flow needs T >= 0 and dt > 0"));
        }
        if self.find_orbit.winding == 0 || !(self.find_orbit.flow_time >= 0.0) {
            return Err(invalid("find_orbit needs a nonzero winding and flow_time >= 0"));
        }
        if self
            .scan_alpha
            .alphas
            .as_ref()
            .is_some_and(|a| a.is_empty() || a.iter().any(|x| !(*x > 0.0)))
        {
            return Err(invalid("scan_alpha.alphas must be positive"));
        }
        if !(self.check_cycles.tau_start > 0.0)
            || self.check_cycles.scan_resolution == 0
            || self.check_cycles.scan_directions == 0
        {
            return Err(invalid("check_cycles needs tau_start > 0 and a nonempty scan"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let c = Config::from_json("{}").unwrap();
        assert_eq!(c, Config::default());
        assert_eq!(c.theta_grid(), 128);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let err = Config::from_json(r#"{"tolerances": {"solver": 0}}"#).unwrap_err();
        assert!(matches!(err, ConfigError::Invalid(_)));
    }

    #[test]
    fn rejects_unknown_keys() {
        assert!(matches!(
            Config::from_json(r#"{"NN": 3}"#),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn rejects_coarse_theta_grid() {
        assert!(Config::from_json(r#"{"N": 8, "M_theta": 17}"#).is_err());
        assert!(Config::from_json(r#"{"N": 8, "M_theta": 18}"#).is_ok());
    }

    #[test]
    fn model_keys_follow_the_documented_names() {
        let c = Config::from_json(
            r#"{"model": {"eps_H": 0.2, "s0": 0.5, "s1": 3.0, "variant": "bump"}}"#,
        )
        .unwrap();
        assert_eq!(c.model.eps_h(), 0.2);
    }
}
