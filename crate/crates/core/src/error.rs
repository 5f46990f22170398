use thiserror::Error;

/// Failure modes shared by every module of the crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    #[error("shape mismatch: expected (d={expected_dim}, N={expected_cutoff}), got (d={dim}, N={cutoff})")]
    ShapeMismatch {
        expected_dim: usize,
        expected_cutoff: usize,
        dim: usize,
        cutoff: usize,
    },

    #[error("grid of {got} points is too small, need at least {need}")]
    GridTooSmall { need: usize, got: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("K(x) with K(0) = 0 requires a Hamiltonian that is flat near the origin")]
    NotFlatNearOrigin,

    #[error("2h'(s) = {level} has no root on (s0, s1)")]
    NoRoot { level: i64 },

    #[error("Picard iteration stopped contracting after {iterations} iterations (ratio {ratio:.3e})")]
    ContractionFailure { iterations: usize, ratio: f64 },

    #[error("Picard iterate left the ball of radius {radius:.3e} (norm {norm:.3e}) at iteration {iterations}")]
    BallExit {
        iterations: usize,
        norm: f64,
        radius: f64,
    },

    #[error("tolerance not met after {iterations} iterations (last step {last_step:.3e})")]
    MaxIter { iterations: usize, last_step: f64 },

    #[error("flow blew up at t = {time:.6} (norm {norm:.3e})")]
    Blowup { time: f64, norm: f64 },

    #[error("Newton iteration diverged after {iterations} iterations (residual {residual:.3e})")]
    NewtonDivergence { iterations: usize, residual: f64 },

    #[error("action minimum estimate {value:.6e} is not positive")]
    NegativeBeta { value: f64 },

    #[error("i/o failure: {0}")]
    Io(String),

    #[error("perturbation vector lies outside the unit L^2_2 ball (norm {norm:.6})")]
    OutsidePerturbationBall { norm: f64 },
}

impl From<std::io::Error> for LabError {
    fn from(e: std::io::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

impl From<csv::Error> for LabError {
    fn from(e: csv::Error) -> Self {
        LabError::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, LabError>;
