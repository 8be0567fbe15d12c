use std::f64::consts::FRAC_PI_2;

use dimbound_core::boxdim::{
    cantor_points, covering_number, embed_trajectory, minkowski_dim, Metric, PointCloud,
};
use dimbound_core::dde::{integrate, DelaySystem, InitialSegment};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn uniform(n: usize, dim: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| (0..dim).map(|_| rng.gen::<f64>()).collect()).collect()
}

#[test]
fn unit_square() {
    let c = PointCloud::new(&uniform(10_000, 2, 7), Metric::Sup).unwrap();
    assert_eq!(covering_number(&c, 0.5).unwrap(), 4);
    let fit = minkowski_dim(&c, 1.0 / 32.0, 0.5).unwrap();
    assert!((fit.estimate - 2.0).abs() <= 0.05, "{fit:?}");
    assert!(fit.reliable);
}

#[test]
fn segment() {
    let pts: Vec<Vec<f64>> = (0..10_000).map(|k| vec![k as f64 / 9999.0, 0.5 * k as f64 / 9999.0]).collect();
    let c = PointCloud::new(&pts, Metric::Euclidean).unwrap();
    let fit = minkowski_dim(&c, 1e-3, 0.5).unwrap();
    assert!((fit.estimate - 1.0).abs() <= 0.05, "{fit:?}");
}

#[test]
fn cantor_depth_ten() {
    let c = PointCloud::new(&cantor_points(10), Metric::Sup).unwrap();
    let fit = minkowski_dim(&c, 1e-4, 0.5).unwrap();
    assert!((fit.estimate - 2f64.ln() / 3f64.ln()).abs() <= 0.05, "{fit:?}");
}

#[test]
fn periodic_embedding_is_a_curve() {
    let sys = DelaySystem::constant_scalar(1.0, -FRAC_PI_2, 1.0).unwrap();
    let phi = InitialSegment::function(|t| vec![(FRAC_PI_2 * t).cos()]);
    let tr = integrate(&sys, &phi, 0.0, 41.0, 1e-2).unwrap();
    // one period, sampled well below the finest scale
    let cloud = embed_trajectory(&tr, 1.0, 8, 1.0, 5.0, 40_000).unwrap();
    assert_eq!(cloud.dim(), 8);
    let fit = minkowski_dim(&cloud, 1.0 / 256.0, 0.25).unwrap();
    assert!((fit.estimate - 1.0).abs() <= 0.1, "{fit:?}");

    let flat = integrate(&DelaySystem::zero(1.0, 1).unwrap(), &InitialSegment::Constant(vec![2.0]), 0.0, 5.0, 0.1).unwrap();
    let c = embed_trajectory(&flat, 1.0, 4, 1.0, 5.0, 100).unwrap();
    assert_eq!(minkowski_dim(&c, 1e-3, 1.0).unwrap().estimate, 0.0);
    let scalar = embed_trajectory(&tr, 1.0, 1, 1.0, 41.0, 5000).unwrap();
    assert!(minkowski_dim(&scalar, 1.0 / 256.0, 0.5).unwrap().estimate <= 1.0 + 1e-9);
    assert!(embed_trajectory(&tr, 1.0, 8, -0.5, 10.0, 10).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn counts_nonincreasing(seed in 0u64..1000, dim in 1usize..4, e in 0.01f64..0.5) {
        let c = PointCloud::new(&uniform(500, dim, seed), Metric::Sup).unwrap();
        prop_assert!(covering_number(&c, 2.0 * e).unwrap() <= covering_number(&c, e).unwrap());
    }

    #[test]
    fn estimate_below_ambient(seed in 0u64..1000, dim in 1usize..4) {
        let c = PointCloud::new(&uniform(2000, dim, seed), Metric::Sup).unwrap();
        let fit = minkowski_dim(&c, 1.0 / 64.0, 0.5).unwrap();
        prop_assert!(fit.estimate <= dim as f64 + 0.1);
    }

    #[test]
    fn offset_robustness(seed in 0u64..1000) {
        let pts: Vec<Vec<f64>> = uniform(4000, 1, seed).into_iter().map(|p| vec![p[0], (6.0 * p[0]).sin()]).collect();
        let c = PointCloud::new(&pts, Metric::Sup).unwrap();
        let eps: Vec<f64> = (2..9).map(|k| 0.5f64.powi(k)).collect();
        let ln2d = 2.0 * 2f64.ln();
        let mut a = Vec::new();
        let mut b = Vec::new();
        for e in &eps {
            let k0 = c.covering_number_offset(*e, 0.0) as f64;
            let k1 = c.covering_number_offset(*e, 0.5) as f64;
            prop_assert!((k0.ln() - k1.ln()).abs() <= ln2d);
            a.push(k0.ln());
            b.push(k1.ln());
        }
        let x: Vec<f64> = eps.iter().map(|e| -e.ln()).collect();
        let slope = |y: &[f64]| {
            let n = x.len() as f64;
            let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
            let sxy: f64 = x.iter().zip(y).map(|(p, q)| (p - mx) * (q - my)).sum();
            let sxx: f64 = x.iter().map(|p| (p - mx).powi(2)).sum();
            sxy / sxx
        };
        prop_assert!((slope(&a) - slope(&b)).abs() <= 0.1);
    }
}
