use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use hls_core::extremal::{
    alternating_maximize, dual_element, el_residual, euclidean_baseline, scaling_family, SolverConfig,
};
use hls_core::grid::build_grid;
use hls_core::manifold::ManifoldSpec;
use hls_core::riesz::{assemble_kernel, critical_exponent, lp_norm, RieszKernel};

#[test]
fn dual_element_beats_random_competitors() {
    let grid = build_grid(&ManifoldSpec::torus(&[1.0, 1.0]).unwrap(), 12).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for p in [1.2, 1.5, 3.0] {
        let h: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.0..1.0)).collect();
        let (f, value) = dual_element(&grid, &h, p).unwrap();
        assert!((lp_norm(&grid, f.values(), p).unwrap() - 1.0).abs() < 1e-12);
        let pair = |g: &[f64]| g.iter().zip(&h).zip(grid.weights()).map(|((a, b), w)| w * a * b).sum::<f64>();
        assert!((pair(f.values()) - value).abs() <= 1e-12 * value);
        for _ in 0..1000 {
            let c: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(0.0..1.0)).collect();
            let norm = lp_norm(&grid, &c, p).unwrap();
            let c: Vec<f64> = c.iter().map(|v| v / norm).collect();
            assert!(pair(&c) <= value * (1.0 + 1e-12));
        }
    }
}

#[test]
fn symmetric_exponents_give_equal_halves_on_the_sphere() {
    let spec = ManifoldSpec::sphere2(1.0).unwrap();
    let grid = build_grid(&spec, 500).unwrap();
    let k = assemble_kernel(&RieszKernel::new(&spec, 1.0).unwrap(), &grid, None).unwrap();
    let exps = critical_exponent(2, 1.0, 4.0 / 3.0).unwrap();
    assert!((exps.t - exps.p).abs() < 1e-12);
    let cfg = SolverConfig::new(exps, 2000, 1e-11, 0).unwrap();
    let res = alternating_maximize(&k, &grid, &cfg, &vec![1.0; grid.len()]).unwrap();
    assert!(res.converged && res.monotone);
    let top = res.f.values().iter().cloned().fold(0.0, f64::max);
    let gap = res.f.values().iter().zip(res.g.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(gap <= 1e-8 * top, "max |f - g| = {gap}");
    assert!(res.f.values().iter().chain(res.g.values()).all(|v| *v >= 0.0));
}

#[test]
fn residual_grows_linearly_with_perturbation_size() {
    let spec = ManifoldSpec::sphere2(1.0).unwrap();
    let grid = build_grid(&spec, 500).unwrap();
    let k = assemble_kernel(&RieszKernel::new(&spec, 1.0).unwrap(), &grid, None).unwrap();
    let exps = critical_exponent(2, 1.0, 1.5).unwrap();
    let cfg = SolverConfig::new(exps, 5000, 1e-12, 0).unwrap();
    let res = alternating_maximize(&k, &grid, &cfg, &vec![1.0; grid.len()]).unwrap();
    assert!(res.converged);
    let (r0, _) = res.residuals;
    assert!(r0 < 1e-8);
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let noise: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let residual_at = |eps: f64| {
        let f: Vec<f64> = res.f.values().iter().zip(&noise).map(|(v, z)| v * (1.0 + eps * z)).collect();
        let norm = lp_norm(&grid, &f, exps.p).unwrap();
        let f: Vec<f64> = f.iter().map(|v| v / norm).collect();
        el_residual(&k, &grid, &f, res.g.values(), res.n_estimate, exps.p, exps.t).unwrap().0
    };
    let rs: Vec<f64> = [1e-3, 2e-3, 4e-3].iter().map(|&e| residual_at(e)).collect();
    for w in rs.windows(2) {
        let ratio = w[1] / w[0];
        assert!((1.6..2.4).contains(&ratio), "residuals {rs:?}");
    }
}

#[test]
fn baseline_is_dilation_invariant_and_refines_in_one_dimension() {
    let small = euclidean_baseline(2, 1.0, 1.5, 1.0, 8, 5000, 1e-11).unwrap();
    let large = euclidean_baseline(2, 1.0, 1.5, 2.0, 8, 5000, 1e-11).unwrap();
    assert!(large.result.n_estimate >= small.result.n_estimate - 1e-10);
    assert!(small.result.converged && small.result.monotone);
    let values: Vec<f64> = [128, 256, 512]
        .iter()
        .map(|&res| {
            let b = euclidean_baseline(1, 0.5, 1.5, 1.0, res, 20_000, 1e-11).unwrap();
            assert!(b.result.monotone);
            b.result.n_estimate
        })
        .collect();
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(0.0, f64::max);
    assert!((hi - lo) / hi < 0.01, "{values:?}");
}

#[test]
fn scaling_family_keeps_norms_and_quotient() {
    let spec = ManifoldSpec::ball(1, 1.0).unwrap();
    let grid = build_grid(&spec, 512).unwrap();
    let k = assemble_kernel(&RieszKernel::new(&spec, 0.5).unwrap(), &grid, None).unwrap();
    let exps = critical_exponent(1, 0.5, 1.5).unwrap();
    let bump = |x: f64, width: f64| (1.0 - (x / width).powi(2)).max(0.0).powi(2);
    let f: Vec<f64> = grid.nodes().iter().map(|x| bump(x[0], 0.5)).collect();
    let g: Vec<f64> = grid.nodes().iter().map(|x| bump(x[0] - 0.1, 0.4)).collect();
    let quotient = |f: &[f64], g: &[f64]| {
        k.bilinear(&grid, f, g).unwrap() / (lp_norm(&grid, f, exps.p).unwrap() * lp_norm(&grid, g, exps.t).unwrap())
    };
    let base = quotient(&f, &g);
    let fp = lp_norm(&grid, &f, exps.p).unwrap();
    let same = scaling_family(&grid, &f, 1.0, exps.p).unwrap();
    assert_eq!(same.values(), &f[..]);
    for lambda in [0.5, 0.25] {
        let fl = scaling_family(&grid, &f, lambda, exps.p).unwrap();
        let gl = scaling_family(&grid, &g, lambda, exps.t).unwrap();
        let norm = lp_norm(&grid, fl.values(), exps.p).unwrap();
        assert!((norm - fp).abs() / fp < 0.01, "lambda {lambda}: {norm} vs {fp}");
        let q = quotient(fl.values(), gl.values());
        assert!((q - base).abs() / base < 0.01, "lambda {lambda}: {q} vs {base}");
    }
}

#[test]
fn constant_pair_residual_vanishes_under_refinement_on_the_sphere() {
    let spec = ManifoldSpec::sphere2(1.0).unwrap();
    let exps = critical_exponent(2, 1.0, 4.0 / 3.0).unwrap();
    let residuals: Vec<f64> = [500, 1000, 2000, 4000]
        .iter()
        .map(|&n| {
            let grid = build_grid(&spec, n).unwrap();
            let k = assemble_kernel(&RieszKernel::new(&spec, 1.0).unwrap(), &grid, None).unwrap();
            let c = vec![(4.0 * std::f64::consts::PI).powf(-1.0 / exps.p); grid.len()];
            let value = k.bilinear(&grid, &c, &c).unwrap();
            let image = k.apply(&grid, &c).unwrap();
            let (lo, hi) = image.iter().fold((f64::INFINITY, 0.0f64), |(a, b), v| (a.min(*v), b.max(*v)));
            let (rf, rg) = el_residual(&k, &grid, &c, &c, value, exps.p, exps.t).unwrap();
            assert!((rf - rg).abs() <= 1e-12 * rf.max(1e-300));
            assert!(rf <= (hi - lo) / lo);
            rf
        })
        .collect();
    assert!(residuals.windows(2).all(|w| w[1] < w[0]), "{residuals:?}");
}
