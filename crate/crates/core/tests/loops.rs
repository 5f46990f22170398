use actionlab::{Loop, Sector, Shape, SobolevOrder};
use num_complex::Complex64;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn random_loop(dim: usize, cutoff: usize, decay: f64, seed: u64) -> Loop {
    let shape = Shape::new(dim, cutoff).unwrap();
    Loop::random(shape, decay, &mut ChaCha8Rng::seed_from_u64(seed))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_matches_sampled_mean(dim in 1usize..3, cutoff in 1usize..24, decay in 0.5f64..3.0, seed: u64) {
        let g = random_loop(dim, cutoff, decay, seed);
        let samples = g.sample(4 * cutoff).unwrap();
        let mean = samples.values().iter().map(|z| z.norm_sqr()).sum::<f64>() / samples.len() as f64;
        let l2 = g.sobolev_norm(SobolevOrder::Zero).powi(2);
        prop_assert!((mean - l2).abs() <= 1e-12 * (1.0 + l2));
    }

    #[test]
    fn sample_synthesize_roundtrip(dim in 1usize..3, cutoff in 1usize..24, extra in 2usize..9, seed: u64) {
        let g = random_loop(dim, cutoff, 1.0, seed);
        let back = Loop::synthesize(&g.sample(2 * cutoff + extra).unwrap(), cutoff).unwrap();
        prop_assert!(back.max_abs_diff(&g).unwrap() <= 1e-12 * (1.0 + g.sobolev_norm(SobolevOrder::Zero)));
    }

    #[test]
    fn projections_split_the_loop(cutoff in 1usize..24, seed: u64) {
        let g = random_loop(2, cutoff, 1.0, seed);
        for project in [Loop::project, Loop::aps_project] {
            let (p, m) = (project(&g, Sector::Plus), project(&g, Sector::Minus));
            prop_assert_eq!(p.add(&m).unwrap(), g.clone());
            prop_assert_eq!(project(&p, Sector::Plus), p.clone());
            prop_assert_eq!(project(&p, Sector::Minus), Loop::zeros(g.shape()));
            let half = g.sobolev_norm(SobolevOrder::Half);
            prop_assert!(p.sobolev_norm(SobolevOrder::Half) <= half && m.sobolev_norm(SobolevOrder::Half) <= half);
        }
    }

    #[test]
    fn inner_product_is_squared_norm(cutoff in 1usize..24, seed: u64) {
        let g = random_loop(1, cutoff, 1.0, seed);
        for order in [SobolevOrder::Zero, SobolevOrder::Half, SobolevOrder::One] {
            let n = g.sobolev_norm(order);
            prop_assert!((g.inner(&g, order).unwrap() - n * n).abs() <= 1e-12 * (1.0 + n * n));
        }
    }
}

#[test]
fn norms_of_a_single_mode() {
    let shape = Shape::new(1, 8).unwrap();
    let g = Loop::single_mode(shape, -3, 0, Complex64::new(0.0, 2.0)).unwrap();
    assert!((g.sobolev_norm(SobolevOrder::Zero) - 2.0).abs() < 1e-15);
    assert!((g.sobolev_norm(SobolevOrder::Half) - 2.0 * 3f64.sqrt()).abs() < 1e-14);
}

#[test]
fn mismatched_shapes_are_rejected() {
    let a = Loop::zeros(Shape::new(1, 4).unwrap());
    let b = Loop::zeros(Shape::new(1, 5).unwrap());
    assert!(a.add(&b).is_err());
    assert!(a.inner(&b, SobolevOrder::Zero).is_err());
}

#[test]
fn loop_json_roundtrip() {
    let g = random_loop(2, 5, 1.0, 3);
    let text = serde_json::to_string(&g).unwrap();
    let back: Loop = serde_json::from_str(&text).unwrap();
    assert_eq!(back, g);
}
