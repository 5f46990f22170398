//! Numerical laboratory for the symplectic action functional on the loop
//! space of `ℂ^d`: truncated Fourier loops, radial Hamiltonians, APS
//! boundary-value operators on short cylinders, a Picard solver for the
//! perturbed Cauchy–Riemann equation, the upward gradient flow, and the
//! finite-dimensional cycles used to locate periodic orbits.

pub mod cycles;
pub mod cylinder;
pub mod error;
pub mod hamiltonian;
pub mod loopspace;
pub mod solver;
pub mod timegrid;

pub use cycles::{CycleSampler, OrbitResult};
pub use cylinder::{BoundaryData, CylinderMap, CylinderNorm};
pub use error::{LabError, Result};
pub use hamiltonian::{HamiltonianModel, Splitting, Variant};
pub use loopspace::{Loop, Samples, Sector, Shape, SobolevOrder, SpectralConvention};
pub use solver::{FlowTrace, SolveResult, SolverOptions};
pub use timegrid::TimeGrid;
