use actionlab::cycles::{
    e_plus, estimate_beta, find_critical_point, perturb, perturbation_bound, radial_orbit_oracle, rho,
    sample_sigma, CycleKind, CycleSampler,
};
use actionlab::{HamiltonianModel, Loop, Sector, Shape, SobolevOrder};
use num_complex::Complex64;

fn shape() -> Shape {
    Shape::new(1, 16).unwrap()
}

#[test]
fn oracle_orbits_at_defaults() {
    let model = HamiltonianModel::default();
    let k1 = radial_orbit_oracle(&model, shape(), 1).unwrap();
    assert!((k1.radius - 1.4261654410).abs() < 1e-9);
    assert!((k1.action - 0.7425088879).abs() < 1e-9);
    let k2 = radial_orbit_oracle(&model, shape(), 2).unwrap();
    assert!((k2.radius - 1.7631957663).abs() < 1e-9);
    assert!((k2.action - 2.0023624337).abs() < 1e-9);
    assert!(radial_orbit_oracle(&model, shape(), 3).is_err());
}

#[test]
fn finder_recovers_the_winding_one_orbit() {
    let model = HamiltonianModel::default();
    let seed = e_plus(shape()).scaled(1.45);
    let found = find_critical_point(&model, &seed, 2.0, 1e-11, None).unwrap();
    let oracle = radial_orbit_oracle(&model, shape(), 1).unwrap();
    assert_eq!(found.winding, 1);
    assert!((found.radius - oracle.radius).abs() < 1e-8);
    assert!(found.gradient_norm < 1e-8);
}

#[test]
fn beta_is_positive_near_the_optimal_radius() {
    let model = HamiltonianModel::default();
    let beta = estimate_beta(&model, shape(), 1.45, 4, 100, 9).unwrap();
    assert!(beta > 0.5 && beta < 0.7, "{beta}");
}

#[test]
fn sampler_dispatches_on_kind() {
    let sampler = CycleSampler { kind: CycleKind::Gamma { alpha: 0.8 }, shape: shape(), seed: 1 };
    for g in sampler.sample(10, false).unwrap() {
        assert!((g.sobolev_norm(SobolevOrder::Half) - 0.8).abs() < 1e-12);
        assert_eq!(g.project(Sector::Minus), Loop::zeros(shape()));
    }
    let ep = e_plus(shape());
    let sigma = CycleSampler { kind: CycleKind::Sigma { tau: 2.0, e_plus: ep.clone() }, shape: shape(), seed: 2 };
    assert_eq!(sigma.sample(5, true).unwrap(), sample_sigma(2.0, &ep, 5, 2, true).unwrap());
}

#[test]
fn perturbation_respects_the_ball_and_bound() {
    let model = HamiltonianModel::default();
    let grid = shape().theta_grid();
    let point = e_plus(shape()).scaled(0.5);
    let v = Loop::single_mode(shape(), 3, 0, Complex64::new(0.09, 0.0)).unwrap();
    let moved = perturb(&point, &v).unwrap();
    let change = (model.action(&moved, grid).unwrap() - model.action(&point, grid).unwrap()).abs();
    assert!(change <= perturbation_bound(&model));
    let big = Loop::single_mode(shape(), 3, 0, Complex64::new(0.2, 0.0)).unwrap();
    assert!(perturb(&point, &big).is_err());
    assert_eq!(rho(0.25), 1.0);
    assert_eq!(rho(4.0), 1.0 / 16.0);
}
