use actionlab::{HamiltonianModel, Loop, Shape, Variant};
use num_complex::Complex64;
use proptest::prelude::*;

fn point(re: f64, im: f64, re2: f64, im2: f64) -> Vec<Complex64> {
    vec![Complex64::new(re, im), Complex64::new(re2, im2)]
}

proptest! {
    #[test]
    fn xh_is_i_times_gradient(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
        let model = HamiltonianModel::default();
        let x = point(a, b, c, d);
        let grad = model.eval_grad_h(&x);
        for (xh, g) in model.eval_xh(&x).iter().zip(&grad) {
            prop_assert_eq!(*xh, Complex64::i() * g);
        }
    }

    #[test]
    fn splitting_reassembles_xh(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0, d in -3.0f64..3.0) {
        let model = HamiltonianModel::default();
        let split = model.split();
        let x = point(a, b, c, d);
        let compact = split.eval_compact_part(&x);
        for ((xh, xi), k) in model.eval_xh(&x).iter().zip(&x).zip(&compact) {
            prop_assert!((xh - (split.c * xi + k)).norm() <= 1e-14 * (1.0 + xi.norm()));
        }
    }

    #[test]
    fn gradient_matches_finite_differences(a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let model = HamiltonianModel::default();
        let x = vec![Complex64::new(a, b)];
        let g = model.eval_grad_h(&x)[0];
        let h = 1e-6;
        let dx = (model.eval_h(&[Complex64::new(a + h, b)]) - model.eval_h(&[Complex64::new(a - h, b)])) / (2.0 * h);
        let dy = (model.eval_h(&[Complex64::new(a, b + h)]) - model.eval_h(&[Complex64::new(a, b - h)])) / (2.0 * h);
        prop_assert!((g.re - dx).abs() < 1e-6 && (g.im - dy).abs() < 1e-6);
    }
}

#[test]
fn flat_inside_and_quadratic_outside() {
    let model = HamiltonianModel::default();
    let inner = [Complex64::new(0.3, 0.2)];
    assert_eq!(model.eval_h(&inner), 0.0);
    assert!(model.eval_grad_h(&inner).iter().all(|z| *z == Complex64::new(0.0, 0.0)));
    let outer = [Complex64::new(2.5, -1.0)];
    let expected = Complex64::i() * 2.0 * model.slope() * outer[0];
    assert!((model.eval_xh(&outer)[0] - expected).norm() < 1e-14);
}

#[test]
fn levels_have_unique_roots_below_the_slope() {
    let model = HamiltonianModel::default();
    for k in [1, 2] {
        let s = model.level_root(k).unwrap();
        assert!(model.s0() < s && s < model.s1());
        assert!((2.0 * model.dh(s) - k as f64).abs() < 1e-10);
    }
    assert!(model.level_root(3).is_err());
}

#[test]
fn radial_action_closed_form() {
    let model = HamiltonianModel::default();
    let shape = Shape::new(1, 8).unwrap();
    let s: f64 = 1.7;
    let g = Loop::single_mode(shape, 2, 0, Complex64::new(s.sqrt(), 0.0)).unwrap();
    let expected = 0.5 * 2.0 * s - model.h(s);
    assert!((model.action(&g, 32).unwrap() - expected).abs() < 1e-12);
}

#[test]
fn invalid_models_are_rejected() {
    assert!(HamiltonianModel::new(0.1, 2.0, 1.0, Variant::Bump).is_err());
    assert!(HamiltonianModel::new(-0.1, 0.25, 4.0, Variant::Bump).is_err());
    assert!(HamiltonianModel::new(f64::NAN, 0.25, 4.0, Variant::Bump).is_err());
}

#[test]
fn resonance_follows_the_slope() {
    assert!(HamiltonianModel::default().split().nonresonant);
    assert!(!HamiltonianModel::pure_quadratic(0.0).unwrap().split().nonresonant);
}
