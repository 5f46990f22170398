use actionlab::cycles::radial_orbit_oracle;
use actionlab::solver::{collar_solve, flow_trajectory, picard_solve};
use actionlab::{
    BoundaryData, CylinderMap, CylinderNorm, HamiltonianModel, Loop, Shape, SobolevOrder, SolverOptions,
    TimeGrid,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn shape() -> Shape {
    Shape::new(1, 12).unwrap()
}

fn options() -> SolverOptions {
    SolverOptions { tol: 1e-12, max_iter: 500, sobolev_constant: 0.9 }
}

#[test]
fn q_reproduces_its_boundary_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let beta = BoundaryData::decompose(&Loop::random(shape(), 1.0, &mut rng));
    let grid = TimeGrid::new(0.1, 32).unwrap();
    let back = CylinderMap::q_op(&beta, &grid).aps_boundary();
    let defect = back.combine().max_abs_diff(&beta.combine()).unwrap();
    assert!(defect < 1e-14, "{defect}");
}

#[test]
fn p_is_a_right_inverse_of_d() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let grid = TimeGrid::new(0.2, 128).unwrap();
    let g = CylinderMap::random_smooth(shape(), &grid, 3, 1.0, &mut rng);
    let u = g.p_op();
    let err = u.apply_d().sub(&g).unwrap().norm(CylinderNorm::L2) / g.norm(CylinderNorm::L2);
    assert!(err < 1e-6, "{err}");
    assert!(u.aps_boundary().norm() < 1e-10);
}

#[test]
fn orbit_cylinder_has_zero_energy() {
    let model = HamiltonianModel::default();
    let orbit = radial_orbit_oracle(&model, shape(), 1).unwrap();
    let grid = TimeGrid::new(1.0 / 1024.0, 64).unwrap();
    let r = collar_solve(&model, &orbit.orbit, &grid, &options()).unwrap();
    assert!(r.energy < 1e-8);
    assert!(r.rest_0().max_abs_diff(&orbit.orbit).unwrap() < 1e-8);
}

#[test]
fn flat_data_gives_the_linear_solution() {
    let model = HamiltonianModel::default();
    let b = Loop::single_mode(shape(), 1, 0, Complex64::new(0.05, 0.0)).unwrap();
    let beta = BoundaryData::decompose(&b);
    let grid = TimeGrid::new(0.05, 32).unwrap();
    let r = picard_solve(&model, &beta, &CylinderMap::zeros(shape(), &grid), &options()).unwrap();
    assert_eq!(r.v_norm, 0.0);
    assert!(r.residual < 1e-10);
}

#[test]
fn linear_flow_matches_the_closed_form() {
    let model = HamiltonianModel::default();
    let (n, alpha, t_end) = (2i64, 0.05, 0.5);
    let start = Loop::single_mode(shape(), n, 0, Complex64::new(alpha, 0.0)).unwrap();
    let trace = flow_trajectory(&model, &start, t_end, 0.005).unwrap();
    let exact = 0.5 * n as f64 * alpha * alpha * ((2.0 * n as f64 * t_end).exp() - 1.0);
    let delta = trace.actions.last().unwrap() - trace.actions[0];
    assert!((delta - exact).abs() < 1e-10);
    assert!(trace.identity_defect() < 1e-10);
    let grown = trace.final_loop.sobolev_norm(SobolevOrder::Zero);
    assert!((grown - alpha * (n as f64 * t_end).exp()).abs() < 1e-12);
}
