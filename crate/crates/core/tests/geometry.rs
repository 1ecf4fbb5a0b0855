use std::f64::consts::PI;

use approx::assert_relative_eq;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hls_core::chart::{metric_distortion, NormalChart};
use hls_core::grid::build_grid;
use hls_core::manifold::{ManifoldSpec, Point};
use hls_core::HlsError;

fn catalog() -> Vec<ManifoldSpec> {
    vec![
        ManifoldSpec::circle(1.5).unwrap(),
        ManifoldSpec::sphere2(2.0).unwrap(),
        ManifoldSpec::torus(&[1.0]).unwrap(),
        ManifoldSpec::torus(&[1.0, 0.7]).unwrap(),
        ManifoldSpec::ball(1, 1.0).unwrap(),
        ManifoldSpec::ball(2, 1.0).unwrap(),
        ManifoldSpec::ball(3, 2.0).unwrap(),
    ]
}

fn random_point(spec: &ManifoldSpec, rng: &mut ChaCha8Rng) -> Point {
    let n = spec.dimension();
    match spec.kind().name() {
        "circle" => [rng.random_range(0.0..2.0 * PI), 0.0, 0.0],
        "sphere2" => loop {
            let v: [f64; 3] = [rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)];
            let len = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
            if len > 0.1 && len <= 1.0 {
                let r = spec.radius().unwrap();
                break [r * v[0] / len, r * v[1] / len, r * v[2] / len];
            }
        },
        "torus1" | "torus2" => {
            let mut x = [0.0; 3];
            for (c, p) in x.iter_mut().zip(spec.periods().unwrap()) {
                *c = rng.random_range(0.0..*p);
            }
            x
        }
        _ => loop {
            let r = spec.radius().unwrap();
            let mut x = [0.0; 3];
            for c in x.iter_mut().take(n) {
                *c = rng.random_range(-r..r);
            }
            if (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() < r {
                break x;
            }
        },
    }
}

#[test]
fn triangle_inequality_on_random_triples() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for spec in catalog() {
        for _ in 0..1000 {
            let [x, y, z] = [0, 1, 2].map(|_| random_point(&spec, &mut rng));
            let (xy, yz, xz) = (spec.distance(&x, &y), spec.distance(&y, &z), spec.distance(&x, &z));
            assert!(xz <= xy + yz + 1e-12, "{spec}: {xz} > {xy} + {yz}");
            assert!(xy >= 0.0 && xy <= spec.diameter() + 1e-12);
            assert!((xy - spec.distance(&y, &x)).abs() <= 1e-14 * xy.max(1.0));
        }
    }
}

#[test]
fn distance_examples() {
    let s = ManifoldSpec::sphere2(1.0).unwrap();
    assert_relative_eq!(s.geodesic_distance(&[0.0, 0.0, 1.0], &[0.0, 0.0, -1.0]).unwrap(), PI, epsilon = 1e-15);
    let t = ManifoldSpec::torus(&[1.0]).unwrap();
    assert_relative_eq!(t.geodesic_distance(&[0.1, 0.0, 0.0], &[0.9, 0.0, 0.0]).unwrap(), 0.2, epsilon = 1e-15);
    let c = ManifoldSpec::circle(2.0).unwrap();
    assert_relative_eq!(c.geodesic_distance(&[0.0, 0.0, 0.0], &[PI / 2.0, 0.0, 0.0]).unwrap(), PI, epsilon = 1e-15);
    assert!(matches!(s.geodesic_distance(&[0.0, 0.0, 1.1], &[0.0, 0.0, 1.0]), Err(HlsError::Domain(_))));
}

#[test]
fn grid_examples_and_weight_convergence() {
    let c = build_grid(&ManifoldSpec::circle(1.0).unwrap(), 4).unwrap();
    assert_eq!(c.len(), 4);
    assert!(c.weights().iter().all(|w| (w - PI / 2.0).abs() < 1e-15));
    let t = build_grid(&ManifoldSpec::torus(&[1.0]).unwrap(), 10).unwrap();
    assert_eq!(t.len(), 10);
    assert_relative_eq!(t.total_weight(), 1.0, epsilon = 1e-14);
    for spec in catalog() {
        let errors: Vec<f64> = [4, 8, 16]
            .iter()
            .map(|&r| {
                let res = if spec.kind().name() == "sphere2" { r * 50 } else { r };
                let g = build_grid(&spec, res).unwrap();
                assert!(g.weights().iter().all(|w| *w > 0.0));
                (g.total_weight() - spec.volume()).abs() / spec.volume()
            })
            .collect();
        assert!(errors.iter().all(|e| *e < 5e-3), "{spec}: {errors:?}");
        assert!(errors.windows(2).all(|w| w[1] <= w[0].max(1e-12)), "{spec}: {errors:?}");
    }
}

#[test]
fn sphere_distortion_bounds_sampled_distance_ratios() {
    let spec = ManifoldSpec::sphere2(1.0).unwrap();
    let center = [0.0, 0.6, 0.8];
    let delta = 0.5;
    let eps = metric_distortion(&spec, &center, delta).unwrap();
    let chart = NormalChart::new(&spec, center, delta).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut sample = || loop {
        let u = [rng.random_range(-delta..delta), rng.random_range(-delta..delta)];
        if u[0].hypot(u[1]) <= delta {
            break u;
        }
    };
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    for _ in 0..10_000 {
        let (u, v) = (sample(), sample());
        let euclid = (u[0] - v[0]).hypot(u[1] - v[1]);
        if euclid < 1e-9 {
            continue;
        }
        let d = spec.distance(&chart.exp_map(&u).unwrap(), &chart.exp_map(&v).unwrap());
        lo = lo.min(d / euclid);
        hi = hi.max(d / euclid);
    }
    assert!(lo >= 1.0 - eps && hi <= 1.0 + eps, "ratios [{lo}, {hi}] vs eps {eps}");
}

#[test]
fn distortion_vanishes_on_flat_entries_and_shrinks_on_the_sphere() {
    let t = ManifoldSpec::torus(&[1.0, 1.0]).unwrap();
    assert_eq!(metric_distortion(&t, &[0.2, 0.3, 0.0], 0.49).unwrap(), 0.0);
    let s = ManifoldSpec::sphere2(1.0).unwrap();
    let mut prev = f64::INFINITY;
    for k in 0..12 {
        let e = metric_distortion(&s, &[1.0, 0.0, 0.0], 2.0 * 0.5f64.powi(k)).unwrap();
        assert!(e >= 0.0 && e < prev);
        prev = e;
    }
    assert!(prev < 1e-6);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn exp_map_reproduces_radial_length(theta in 0.0..(2.0 * PI), r in 0.0..0.9f64, lat in -1.4..1.4f64) {
        let spec = ManifoldSpec::sphere2(1.0).unwrap();
        let center = [lat.cos(), 0.0, lat.sin()];
        let chart = NormalChart::new(&spec, center, 0.9).unwrap();
        let u = [r * theta.cos(), r * theta.sin()];
        let x = chart.exp_map(&u).unwrap();
        prop_assert!(spec.check_point(&x).is_ok());
        prop_assert!((spec.distance(&center, &x) - r).abs() <= chart.distortion() * r + 1e-12);
    }

    #[test]
    fn torus_chart_is_translation(u0 in -0.3..0.3f64, u1 in -0.3..0.3f64, c0 in 0.0..1.0f64, c1 in 0.0..2.0f64) {
        prop_assume!(u0.hypot(u1) <= 0.4);
        let spec = ManifoldSpec::torus(&[1.0, 2.0]).unwrap();
        let chart = NormalChart::new(&spec, [c0, c1, 0.0], 0.4).unwrap();
        let x = chart.exp_map(&[u0, u1]).unwrap();
        prop_assert!((spec.distance(chart.center(), &x) - u0.hypot(u1)).abs() < 1e-12);
    }
}
