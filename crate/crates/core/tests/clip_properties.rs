use dicesgd::clip::{clip, clip_residual, normalize};
use dicesgd::{NoiseSource, Vector};
use proptest::prelude::*;

fn vector(dim: usize) -> impl Strategy<Value = Vector> {
    prop::collection::vec(-50.0f64..50.0, dim).prop_map(|v| Vector::new(v).unwrap())
}

fn pair() -> impl Strategy<Value = (Vector, Vector)> {
    prop_oneof![Just(1usize), Just(2usize), Just(50usize)].prop_flat_map(|d| (vector(d), vector(d)))
}

proptest! {
    #[test]
    fn residual_is_non_expansive((a, b) in pair(), c in 1e-3f64..20.0) {
        let ra = clip_residual(&a, c).unwrap();
        let rb = clip_residual(&b, c).unwrap();
        let lhs = ra.distance(&rb).unwrap();
        prop_assert!(lhs <= a.distance(&b).unwrap() * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn clip_plus_residual_is_identity(v in vector(7), c in 1e-3f64..20.0) {
        let out = clip(&v, c).unwrap();
        let r = clip_residual(&v, c).unwrap();
        // Exact up to the rounding of one subtraction and one addition.
        let back = out.clipped.add(&r).unwrap();
        for j in 0..v.dim() {
            prop_assert!((back[j] - v[j]).abs() <= 2.0 * f64::EPSILON * v[j].abs());
        }
        prop_assert!(out.clipped.norm() <= c + 1e-12);
        prop_assert!((r.norm() - (v.norm() - c).max(0.0)).abs() <= 1e-9 * v.norm().max(1.0));
    }

    #[test]
    fn clip_factor_matches_definition(v in vector(5), c in 1e-3f64..20.0) {
        let out = clip(&v, c).unwrap();
        let n = v.norm();
        let expect = if n == 0.0 { 1.0 } else { (c / n).min(1.0) };
        prop_assert_eq!(out.factor, expect);
        prop_assert_eq!(out.clipped, v.scale(out.factor));
    }

    #[test]
    fn normalize_hits_threshold(v in vector(9), c in 1e-3f64..20.0) {
        prop_assume!(v.norm() > 0.0);
        prop_assert!((normalize(&v, c).unwrap().norm() - c).abs() <= 1e-12 * c.max(1.0));
    }
}

#[test]
fn non_expansive_on_ten_thousand_pairs() {
    let mut noise = NoiseSource::new(2024, 7);
    let mut violations = 0;
    for d in [1usize, 2, 50] {
        for k in 0..10_000 {
            let scale = 0.1 * (1 + k % 40) as f64;
            let a = noise.gaussian_vector(d, scale).unwrap();
            let b = noise.gaussian_vector(d, scale).unwrap();
            let lhs = clip_residual(&a, 1.0)
                .unwrap()
                .distance(&clip_residual(&b, 1.0).unwrap())
                .unwrap();
            if lhs > a.distance(&b).unwrap() * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    assert_eq!(violations, 0);
}

/// Sum of per-coordinate sample variances.
fn trace_variance(xs: &[Vector]) -> f64 {
    let mean = Vector::mean_of(xs).unwrap();
    xs.iter()
        .map(|x| x.sub(&mean).unwrap().norm_squared())
        .sum::<f64>()
        / (xs.len() - 1) as f64
}

#[test]
fn residual_reduces_variance() {
    let mut noise = NoiseSource::new(99, 7);
    for (d, c, shift) in [(1usize, 0.5, 0.0), (3, 1.0, 2.0), (10, 2.0, 0.5)] {
        let xs: Vec<Vector> = (0..10_000)
            .map(|_| {
                let z = noise.gaussian_vector(d, 1.5).unwrap();
                Vector::new(z.as_slice().iter().map(|v| v + shift).collect()).unwrap()
            })
            .collect();
        let rs: Vec<Vector> = xs.iter().map(|x| clip_residual(x, c).unwrap()).collect();
        let (vx, vr) = (trace_variance(&xs), trace_variance(&rs));
        assert!(vr <= vx * (1.0 + 1e-6), "d={d}: {vr} > {vx}");
    }
}
