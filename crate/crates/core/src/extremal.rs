//! Sharp constants and extremal pairs for the discrete bilinear form
//!
//! ```text
//! B(f, g) = Σ_ij w_i w_j f_i K_ij g_j,   N = sup { B(f, g) : ‖f‖_p = ‖g‖_t = 1 }
//! ```
//!
//! by alternating sharp-Hölder steps `f ← dual(I_α g, p)`, `g ← dual(I_α f, t)`.
//! Each half-step maximizes `B` over one argument, so the value sequence is
//! nondecreasing. At a fixed point the pair solves the discrete
//! Euler–Lagrange system `I_α g = N f^{p−1}`, `I_α f = N g^{t−1}`.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{HlsError, Result};
use crate::grid::{build_grid, QuadratureGrid};
use crate::manifold::ManifoldSpec;
use crate::riesz::{
    assemble_kernel, critical_exponent, dual_exponent, lp_norm, lp_norm_unchecked, weighted, DensityField, Exponents,
    KernelMatrix, KernelPart, RieszKernel,
};

/// Relative slack allowed on each monotonicity check.
pub const MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    pub exponents: Exponents,
    pub max_iter: usize,
    /// Relative tolerance on both the value change and the iterate change.
    pub tol: f64,
    pub seed: u64,
}

impl SolverConfig {
    pub fn new(exponents: Exponents, max_iter: usize, tol: f64, seed: u64) -> Result<Self> {
        let Exponents { n, alpha, p, q, t } = exponents;
        let expect = critical_exponent(n, alpha, p)?;
        if (expect.q - q).abs() > 1e-12 * q || (expect.t - t).abs() > 1e-12 * t {
            return Err(HlsError::Exponent(format!(
                "inconsistent exponents: p={p}, q={q}, t={t} (expected q={}, t={})",
                expect.q, expect.t
            )));
        }
        if !(tol > 0.0) || max_iter == 0 {
            return Err(HlsError::Config(format!("need tol > 0 and max_iter >= 1, got {tol}, {max_iter}")));
        }
        Ok(Self { exponents, max_iter, tol, seed })
    }

    /// Solver for a raw exponent pair `(p, t)`, outside the HLS relation.
    /// Maximizes `B(f, g)` over `‖f‖_p = ‖g‖_t = 1` for any positive kernel;
    /// `p = t = 2` is power iteration.
    pub fn for_pair(p: f64, t: f64, max_iter: usize, tol: f64) -> Result<Self> {
        if !(p > 1.0 && t > 1.0 && p.is_finite() && t.is_finite()) {
            return Err(HlsError::Exponent(format!("need p, t in (1, inf), got {p}, {t}")));
        }
        if !(tol > 0.0) || max_iter == 0 {
            return Err(HlsError::Config(format!("need tol > 0 and max_iter >= 1, got {tol}, {max_iter}")));
        }
        let exponents = Exponents { n: 0, alpha: 0.0, p, q: dual_exponent(t), t };
        Ok(Self { exponents, max_iter, tol, seed: 0 })
    }
}

/// One full sweep of the alternating iteration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `B(f_k, g_{k−1})` after the `f` half-step.
    pub half_value: f64,
    /// `B(f_k, g_k)`.
    pub value: f64,
    pub residual_f: f64,
    pub residual_g: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExtremalResult {
    pub n_estimate: f64,
    pub f: DensityField,
    pub g: DensityField,
    pub iterations: usize,
    pub history: Vec<IterationRecord>,
    pub residuals: (f64, f64),
    pub converged: bool,
    /// Every half-step was nondecreasing within [`MONOTONE_TOL`].
    pub monotone: bool,
}

impl ExtremalResult {
    pub fn values(&self) -> Vec<f64> {
        self.history.iter().map(|r| r.value).collect()
    }

    /// `iteration,value,residual_f,residual_g`
    pub fn write_history_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "iteration,value,residual_f,residual_g")?;
        for r in &self.history {
            writeln!(out, "{},{},{},{}", r.iteration, r.value, r.residual_f, r.residual_g)?;
        }
        Ok(())
    }
}

/// Maximizer of `Σ w f h` over `‖f‖_p = 1`: `f = h^{p'−1} / ‖h^{p'−1}‖_p`,
/// attaining `‖h‖_{p'}`.
pub fn dual_element(grid: &QuadratureGrid, h: &[f64], p: f64) -> Result<(DensityField, f64)> {
    if h.len() != grid.len() {
        return Err(HlsError::Usage(format!("field has {} values, grid has {} nodes", h.len(), grid.len())));
    }
    if !(p > 1.0 && p.is_finite()) {
        return Err(HlsError::Exponent(format!("dual_element needs p in (1, inf), got {p}")));
    }
    if let Some(v) = h.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(HlsError::Domain(format!("dual_element expects a nonnegative field, found {v}")));
    }
    if h.iter().all(|v| *v == 0.0) {
        return Err(HlsError::Degenerate("dual_element of the zero field".into()));
    }
    let (f, value) = dual_unchecked(grid.weights(), h, p);
    Ok((DensityField::new(f, p)?, value))
}

fn dual_unchecked(w: &[f64], h: &[f64], p: f64) -> (Vec<f64>, f64) {
    let pp = dual_exponent(p);
    // Rescale by the max first so large powers cannot overflow.
    let scale = h.iter().copied().fold(0.0, f64::max);
    let mut f: Vec<f64> = h.iter().map(|v| (v / scale).powf(pp - 1.0)).collect();
    let norm = lp_norm_unchecked(w, &f, p);
    f.iter_mut().for_each(|v| *v /= norm);
    let value = scale * lp_norm_unchecked(w, &h.iter().map(|v| v / scale).collect::<Vec<_>>(), pp);
    (f, value)
}

/// Positive random field, uniform on `[0.05, 1.05)`, reproducible per seed.
pub fn random_positive_field(len: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..len).map(|_| 0.05 + rng.random::<f64>()).collect()
}

/// Runs the alternating sharp-Hölder iteration from `initial_g`.
///
/// Stops once two consecutive sweeps change both the value and the iterates
/// by less than `tol` (relative); otherwise returns the last iterate with
/// `converged = false`.
pub fn alternating_maximize(
    k: &KernelMatrix,
    grid: &QuadratureGrid,
    config: &SolverConfig,
    initial_g: &[f64],
) -> Result<ExtremalResult> {
    let Exponents { p, t, q, .. } = config.exponents;
    if k.size() != grid.len() || initial_g.len() != grid.len() {
        return Err(HlsError::Usage(format!(
            "kernel {}x{}, grid {} nodes, initial field {} values",
            k.size(),
            k.size(),
            grid.len(),
            initial_g.len()
        )));
    }
    DensityField::new(initial_g.to_vec(), t)?;
    let w = grid.weights();
    let norm0 = lp_norm(grid, initial_g, t)?;
    if norm0 == 0.0 {
        return Err(HlsError::Degenerate("initial g is identically zero".into()));
    }
    let mut g_vals: Vec<f64> = initial_g.iter().map(|v| v / norm0).collect();

    let mut ig = k.apply_weighted(&weighted(w, &g_vals), KernelPart::Full);
    let mut f_vals = vec![0.0; grid.len()];
    let mut history = Vec::new();
    let mut monotone = true;
    let mut calm_sweeps = 0;
    let mut converged = false;
    let mut prev_value = f64::NEG_INFINITY;

    for iteration in 1..=config.max_iter {
        let (f_new, half_value) = dual_unchecked(w, &ig, p);
        if half_value < prev_value * (1.0 - MONOTONE_TOL) {
            monotone = false;
        }
        let if_new = k.apply_weighted(&weighted(w, &f_new), KernelPart::Full);
        let (g_new, _) = dual_unchecked(w, &if_new, t);
        ig = k.apply_weighted(&weighted(w, &g_new), KernelPart::Full);
        let value: f64 = w.iter().zip(&f_new).zip(&ig).map(|((w, a), b)| w * a * b).sum();
        if value < half_value * (1.0 - MONOTONE_TOL) {
            monotone = false;
        }
        let (residual_f, residual_g) = residuals_from_images(w, &f_new, &g_new, &ig, &if_new, value, p, t, q);

        let change = if iteration == 1 {
            f64::INFINITY
        } else {
            let df: Vec<f64> = f_new.iter().zip(&f_vals).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = g_new.iter().zip(&g_vals).map(|(a, b)| a - b).collect();
            lp_norm_unchecked(w, &df, p).max(lp_norm_unchecked(w, &dg, t))
        };
        let value_change = (value - prev_value).abs() / value.abs().max(f64::MIN_POSITIVE);
        f_vals = f_new;
        g_vals = g_new;
        prev_value = value;
        history.push(IterationRecord { iteration, half_value, value, residual_f, residual_g });

        if value_change < config.tol && change < config.tol {
            calm_sweeps += 1;
            if calm_sweeps >= 2 {
                converged = true;
                break;
            }
        } else {
            calm_sweeps = 0;
        }
    }

    let last = *history.last().expect("max_iter >= 1");
    Ok(ExtremalResult {
        n_estimate: last.value,
        f: DensityField::new(f_vals, p)?,
        g: DensityField::new(g_vals, t)?,
        iterations: history.len(),
        residuals: (last.residual_f, last.residual_g),
        history,
        converged,
        monotone,
    })
}

#[allow(clippy::too_many_arguments)]
fn residuals_from_images(
    w: &[f64],
    f: &[f64],
    g: &[f64],
    ig: &[f64],
    if_: &[f64],
    value: f64,
    p: f64,
    t: f64,
    q: f64,
) -> (f64, f64) {
    let rel = |image: &[f64], field: &[f64], power: f64, norm_exp: f64| {
        let diff: Vec<f64> = image.iter().zip(field).map(|(a, b)| a - value * b.powf(power)).collect();
        let den = lp_norm_unchecked(w, image, norm_exp);
        let num = lp_norm_unchecked(w, &diff, norm_exp);
        if den > 0.0 {
            num / den
        } else {
            num
        }
    };
    (rel(ig, f, p - 1.0, dual_exponent(p)), rel(if_, g, t - 1.0, q))
}

/// Relative Euler–Lagrange residuals
/// `‖I_α g − N f^{p−1}‖_{p'} / ‖I_α g‖_{p'}` and
/// `‖I_α f − N g^{t−1}‖_q / ‖I_α f‖_q`.
pub fn el_residual(
    k: &KernelMatrix,
    grid: &QuadratureGrid,
    f: &[f64],
    g: &[f64],
    n_value: f64,
    p: f64,
    t: f64,
) -> Result<(f64, f64)> {
    let ig = k.apply(grid, g)?;
    let if_ = k.apply(grid, f)?;
    let q = dual_exponent(t);
    Ok(residuals_from_images(grid.weights(), f, g, &ig, &if_, n_value, p, t, q))
}

/// Euclidean-ball extremal problem used as the proxy for the constant on `R^n`.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub grid: QuadratureGrid,
    pub kernel: KernelMatrix,
    pub exponents: Exponents,
    pub result: ExtremalResult,
}

/// Solves the flat-kernel problem on the ball of radius `radius` with
/// `resolution` lattice cells per radius, starting from `g ≡ 1`.
///
/// The discrete problem is dilation invariant (weights scale as `λⁿ`, the
/// kernel and diagonal cells as `λ^{α−n}`), so the estimate depends on the
/// resolution, not on `radius`.
pub fn euclidean_baseline(
    n: usize,
    alpha: f64,
    p: f64,
    radius: f64,
    resolution: usize,
    max_iter: usize,
    tol: f64,
) -> Result<Baseline> {
    let exponents = critical_exponent(n, alpha, p)?;
    let spec = ManifoldSpec::ball(n, radius)?;
    let grid = build_grid(&spec, resolution)?;
    let kernel = assemble_kernel(&RieszKernel::new(&spec, alpha)?, &grid, None)?;
    let config = SolverConfig::new(exponents, max_iter, tol, 0)?;
    let result = alternating_maximize(&kernel, &grid, &config, &vec![1.0; grid.len()])?;
    Ok(Baseline { grid, kernel, exponents, result })
}

/// Norm-preserving dilation `f_λ(x) = λ^{−n/p} f(x/λ)`, resampled on the same
/// Euclidean-ball grid by multilinear interpolation.
pub fn scaling_family(grid: &QuadratureGrid, f: &[f64], lambda: f64, p: f64) -> Result<DensityField> {
    let lattice =
        grid.lattice().ok_or_else(|| HlsError::Usage("scaling_family needs a Euclidean-ball catalog grid".into()))?;
    if f.len() != grid.len() {
        return Err(HlsError::Usage("field and grid sizes differ".into()));
    }
    if !(lambda.is_finite() && lambda > 0.0) {
        return Err(HlsError::Domain(format!("scaling factor must be > 0, got {lambda}")));
    }
    let radius = grid.spec().radius().unwrap();
    let support = grid
        .nodes()
        .iter()
        .zip(f)
        .filter(|(_, v)| **v != 0.0)
        .map(|(x, _)| crate::manifold::norm3(x))
        .fold(0.0, f64::max);
    if lambda * support >= radius {
        return Err(HlsError::Domain(format!(
            "rescaled support radius {} leaves the ball of radius {radius}",
            lambda * support
        )));
    }
    if lambda == 1.0 {
        return DensityField::new(f.to_vec(), p);
    }
    let n = grid.spec().dimension();
    let amp = lambda.powf(-(n as f64) / p);
    let values = grid
        .nodes()
        .iter()
        .map(|x| {
            let mut base = [0i64; 3];
            let mut frac = [0.0; 3];
            for a in 0..n {
                let u = lattice.coord(x[a] / lambda);
                base[a] = u.floor() as i64;
                frac[a] = u - u.floor();
            }
            let mut acc = 0.0;
            for corner in 0..(1usize << n) {
                let mut idx = [0i64; 3];
                let mut weight = 1.0;
                for a in 0..n {
                    let bit = (corner >> a) & 1;
                    idx[a] = base[a] + bit as i64;
                    weight *= if bit == 1 { frac[a] } else { 1.0 - frac[a] };
                }
                if weight != 0.0 {
                    if let Some(j) = lattice.node_at(&idx[..n]) {
                        acc += weight * f[j];
                    }
                }
            }
            (amp * acc).max(0.0)
        })
        .collect();
    DensityField::new(values, p)
}
