//! Shared state of a run: validated config, loop shape and the sampled
//! Sobolev constant that fixes the Picard ball.

use std::sync::OnceLock;

use actionlab::cycles::scan_alpha;
use actionlab::solver::{estimate_sobolev_constant, SolverOptions};
use actionlab::{HamiltonianModel, LabError, Result, Shape, TimeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::config::Config;
use crate::report::Environment;

pub struct Lab {
    pub config: Config,
    pub shape: Shape,
    pub sobolev_constant: f64,
    alpha_scan: OnceLock<std::result::Result<AlphaScan, String>>,
}

/// `estimate_beta` over the α grid and its maximizer `α*`.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaScan {
    pub alphas: Vec<f64>,
    /// `None` where the estimate is not positive.
    pub betas: Vec<Option<f64>>,
    pub alpha_star: f64,
    pub beta_star: f64,
}

impl Lab {
    pub fn new(config: Config) -> Result<Self> {
        let shape = config.shape();
        let sobolev_constant = estimate_sobolev_constant(
            shape,
            &config.eps_list,
            config.m_t,
            config.samples.sobolev_constant,
            config.seed,
        )?;
        Ok(Self {
            config,
            shape,
            sobolev_constant,
            alpha_scan: OnceLock::new(),
        })
    }

    pub fn model(&self) -> &HamiltonianModel {
        &self.config.model
    }

    pub fn theta(&self) -> usize {
        self.config.theta_grid()
    }

    /// Independent deterministic stream per check.
    pub fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.config.seed);
        rng.set_stream(stream);
        rng
    }

    /// Seed for library samplers that take a plain `u64`.
    pub fn seed(&self, stream: u64) -> u64 {
        self.config.seed.wrapping_mul(0x9e37_79b9_7f4a_7c15).wrapping_add(stream)
    }

    pub fn grid(&self, eps: f64) -> Result<TimeGrid> {
        TimeGrid::new(eps, self.config.m_t)
    }

    pub fn solver_options(&self) -> SolverOptions {
        SolverOptions {
            tol: self.config.tolerances.solver,
            max_iter: self.config.solve_cylinder.max_iter,
            sobolev_constant: self.sobolev_constant,
        }
    }

    /// The α scan of the configured model, computed once per run.
    pub fn alpha_scan(&self) -> Result<AlphaScan> {
        self.alpha_scan
            .get_or_init(|| self.compute_alpha_scan().map_err(|e| e.to_string()))
            .clone()
            .map_err(LabError::InvalidParameter)
    }

    fn compute_alpha_scan(&self) -> Result<AlphaScan> {
        let alphas = self.config.scan_alpha.grid();
        let samples = &self.config.samples;
        let results = scan_alpha(
            self.model(),
            self.shape,
            &alphas,
            samples.beta_starts,
            samples.descent_steps,
            self.seed(71),
        );
        let mut betas = Vec::with_capacity(alphas.len());
        let (mut alpha_star, mut beta_star) = (f64::NAN, f64::NEG_INFINITY);
        for (alpha, beta) in results {
            let beta = match beta {
                Ok(b) => Some(b),
                Err(LabError::NegativeBeta { .. }) => None,
                Err(e) => return Err(e),
            };
            if let Some(b) = beta {
                if b > beta_star {
                    (alpha_star, beta_star) = (alpha, b);
                }
            }
            betas.push(beta);
        }
        if !beta_star.is_finite() {
            return Err(LabError::NegativeBeta { value: beta_star });
        }
        Ok(AlphaScan {
            alphas,
            betas,
            alpha_star,
            beta_star,
        })
    }

    pub fn environment(&self) -> Environment {
        let model = *self.model();
        let split = model.split();
        Environment {
            d: self.config.d,
            cutoff: self.config.cutoff,
            m_t: self.config.m_t,
            m_theta: self.theta(),
            eps_list: self.config.eps_list.clone(),
            seed: self.config.seed,
            model,
            sobolev_constant: self.sobolev_constant,
            ball_radius: self.solver_options().ball_radius(),
            k_constant: model.k_constant().ok(),
            splitting_c_imag: split.c.im,
            splitting_lipschitz: split.lipschitz,
            platform: format!(
                "{}-{}; IEEE-754 binary64, results reproducible on the same platform",
                std::env::consts::ARCH,
                std::env::consts::OS
            ),
        }
    }
}
