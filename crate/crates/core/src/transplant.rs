//! Lower bounds for the manifold constant from scaled Euclidean extremizers.
//!
//! A converged Euclidean pair `(f, g)` is dilated to scale `λ`, cut off
//! outside `B_δ` and pushed through a normal chart of radius `δ`. On the
//! manifold the pair gives the quotient `B(u,v) / (‖u‖_p ‖v‖_t)`, while the
//! Euclidean side supplies the certificate
//!
//! ```text
//! (1−ε)^n / (1+ε)^{n/2·(1/p+1/t)+n−α} · (N − I − II)
//! I  = N ∫_{|x|>δ} f_λ^p,   II = N ∫_{|x|>δ} g_λ^t
//! ```
//!
//! The pushed-forward pair lives on a patched grid: the catalog grid with the
//! nodes inside the chart ball removed, plus the chart images of the
//! Euclidean nodes with weights `λⁿ w √det g`.

use std::io::Write;

use crate::chart::NormalChart;
use crate::error::{HlsError, Result};
use crate::extremal::{alternating_maximize, euclidean_baseline, Baseline, SolverConfig};
use crate::grid::{build_grid, QuadratureGrid};
use crate::manifold::{norm3, ManifoldSpec, Point};
use crate::riesz::{assemble_kernel, lp_mass, lp_norm, DensityField, Exponents, KernelMatrix, RieszKernel};

/// `(1−ε)^n / (1+ε)^{n/2·(1/p+1/t)+n−α}`; exactly 1 when `ε = 0`.
pub fn certificate_prefactor(exponents: &Exponents, distortion: f64) -> f64 {
    if distortion == 0.0 {
        return 1.0;
    }
    let Exponents { n, alpha, p, t, .. } = *exponents;
    let n = n as f64;
    let power = n / 2.0 * (1.0 / p + 1.0 / t) + n - alpha;
    (1.0 - distortion).powf(n) / (1.0 + distortion).powf(power)
}

/// Euclidean pair dilated by `λ` on the dilated ball grid.
#[derive(Debug, Clone)]
pub struct ScaledPair {
    pub lambda: f64,
    pub grid: QuadratureGrid,
    pub kernel: KernelMatrix,
    pub f: Vec<f64>,
    pub g: Vec<f64>,
}

/// Exact dilation of the baseline pair: nodes `λx`, weights `λⁿw`,
/// values `λ^{−n/p} f` and `λ^{−n/t} g`. Norms and the bilinear form are
/// unchanged to rounding.
pub fn scaled_pair(baseline: &Baseline, lambda: f64) -> Result<ScaledPair> {
    let Exponents { n, p, t, .. } = baseline.exponents;
    let grid = baseline.grid.dilated(lambda)?;
    let kernel = baseline.kernel.dilated(lambda)?;
    let af = lambda.powf(-(n as f64) / p);
    let ag = lambda.powf(-(n as f64) / t);
    let f = baseline.result.f.values().iter().map(|v| v * af).collect();
    let g = baseline.result.g.values().iter().map(|v| v * ag).collect();
    Ok(ScaledPair { lambda, grid, kernel, f, g })
}

/// Zeroes `f` at Euclidean nodes with `|x| ≥ radius`.
pub fn truncate(grid: &QuadratureGrid, f: &[f64], radius: f64, exponent: f64) -> Result<DensityField> {
    if f.len() != grid.len() {
        return Err(HlsError::Usage("field and grid sizes differ".into()));
    }
    if !(radius > 0.0) {
        return Err(HlsError::Domain(format!("truncation radius must be > 0, got {radius}")));
    }
    let values = grid.nodes().iter().zip(f).map(|(x, v)| if norm3(x) < radius { *v } else { 0.0 }).collect();
    DensityField::new(values, exponent)
}

/// A scaled pair cut off outside `B_radius`.
#[derive(Debug, Clone)]
pub struct TruncatedPair {
    pub grid: QuadratureGrid,
    pub f: DensityField,
    pub g: DensityField,
    pub radius: f64,
}

pub fn truncate_pair(pair: &ScaledPair, radius: f64, exponents: &Exponents) -> Result<TruncatedPair> {
    Ok(TruncatedPair {
        grid: pair.grid.clone(),
        f: truncate(&pair.grid, &pair.f, radius, exponents.p)?,
        g: truncate(&pair.grid, &pair.g, radius, exponents.t)?,
        radius,
    })
}

/// Tail terms of a Euclidean pair outside `B_radius`:
/// `I = N Σ_out w f^p`, `II = N Σ_out w g^t` and the bilinear form of the
/// two tails (diagonal cells included).
pub fn correction_terms(
    grid: &QuadratureGrid,
    kernel: &KernelMatrix,
    f: &[f64],
    g: &[f64],
    radius: f64,
    n_proxy: f64,
    exponents: &Exponents,
) -> Result<(f64, f64, f64)> {
    let f_out: Vec<f64> = grid.nodes().iter().zip(f).map(|(x, v)| if norm3(x) < radius { 0.0 } else { *v }).collect();
    let g_out: Vec<f64> = grid.nodes().iter().zip(g).map(|(x, v)| if norm3(x) < radius { 0.0 } else { *v }).collect();
    let w = grid.weights();
    let term_i = n_proxy * lp_mass(w, &f_out, exponents.p);
    let term_ii = n_proxy * lp_mass(w, &g_out, exponents.t);
    let term_iii = kernel.bilinear(grid, &f_out, &g_out)?;
    Ok((term_i, term_ii, term_iii.max(0.0)))
}

/// Pair pushed onto the manifold, on its patched grid.
#[derive(Debug, Clone)]
pub struct TransplantedPair {
    pub grid: QuadratureGrid,
    pub u: DensityField,
    pub v: DensityField,
    /// Index range of the pushed nodes of each patch.
    pub patches: Vec<std::ops::Range<usize>>,
}

/// One chart together with the truncated pair to push through it. `share`
/// rescales `f` to carry `share` of the `p`-mass and `g` to carry `share` of
/// the `t`-mass.
#[derive(Debug, Clone, Copy)]
pub struct Patch<'a> {
    pub chart: &'a NormalChart,
    pub pair: &'a TruncatedPair,
    pub share: f64,
}

/// Pushes one truncated pair through `chart` into `global`.
pub fn transplant(global: &QuadratureGrid, chart: &NormalChart, pair: &TruncatedPair) -> Result<TransplantedPair> {
    transplant_patches(global, &[Patch { chart, pair, share: 1.0 }])
}

/// Pushes several truncated pairs through disjoint charts.
pub fn transplant_patches(global: &QuadratureGrid, patches: &[Patch<'_>]) -> Result<TransplantedPair> {
    let spec = global.spec();
    if patches.is_empty() {
        return Err(HlsError::Usage("no patches to transplant".into()));
    }
    let mut radii = Vec::with_capacity(patches.len());
    for patch in patches {
        let chart = patch.chart;
        if chart.spec() != spec {
            return Err(HlsError::Usage(format!("chart lives on {}, grid on {spec}", chart.spec())));
        }
        let pair = patch.pair;
        if pair.radius != chart.radius() {
            return Err(HlsError::Usage(format!(
                "truncation radius {} does not match chart radius {}",
                pair.radius,
                chart.radius()
            )));
        }
        if pair.grid.spec().dimension() != spec.dimension() {
            return Err(HlsError::Usage("Euclidean pair and manifold dimensions differ".into()));
        }
        if !(patch.share > 0.0 && patch.share <= 1.0) {
            return Err(HlsError::Usage(format!("patch share must lie in (0, 1], got {}", patch.share)));
        }
        let ball_radius = pair.grid.spec().radius().expect("ball grid");
        radii.push(chart.radius().min(ball_radius));
    }
    for a in 0..patches.len() {
        for b in (a + 1)..patches.len() {
            let d = spec.distance(patches[a].chart.center(), patches[b].chart.center());
            if d < radii[a] + radii[b] {
                return Err(HlsError::Usage(format!("patches {a} and {b} overlap")));
            }
        }
    }

    let mut nodes: Vec<Point> = Vec::new();
    let mut weights = Vec::new();
    for (x, w) in global.nodes().iter().zip(global.weights()) {
        let inside = patches.iter().zip(&radii).any(|(p, r)| spec.distance(p.chart.center(), x) < *r);
        if !inside {
            nodes.push(*x);
            weights.push(*w);
        }
    }
    let mut u = vec![0.0; nodes.len()];
    let mut v = vec![0.0; nodes.len()];
    let mut ranges = Vec::with_capacity(patches.len());
    let n = spec.dimension();
    for patch in patches {
        let pair = patch.pair;
        let (p, t) = (pair.f.exponent(), pair.g.exponent());
        let (af, ag) = (patch.share.powf(1.0 / p), patch.share.powf(1.0 / t));
        let start = nodes.len();
        for (i, x) in pair.grid.nodes().iter().enumerate() {
            if norm3(x) >= pair.radius {
                continue;
            }
            nodes.push(patch.chart.exp_map(&x[..n])?);
            weights.push(pair.grid.weights()[i] * patch.chart.volume_factor(&x[..n]));
            u.push(af * pair.f.values()[i]);
            v.push(ag * pair.g.values()[i]);
        }
        ranges.push(start..nodes.len());
    }
    let grid = QuadratureGrid::from_parts(*spec, nodes, weights)?;
    Ok(TransplantedPair {
        grid,
        u: DensityField::new(u, pair_p(patches))?,
        v: DensityField::new(v, pair_t(patches))?,
        patches: ranges,
    })
}

fn pair_p(patches: &[Patch<'_>]) -> f64 {
    patches[0].pair.f.exponent()
}

fn pair_t(patches: &[Patch<'_>]) -> f64 {
    patches[0].pair.g.exponent()
}

/// One point of a `λ` sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct TransplantReport {
    pub lambda: f64,
    pub delta: f64,
    pub distortion: f64,
    /// `B(u,v) / (‖u‖_p ‖v‖_t)` on the patched grid.
    pub quotient: f64,
    pub n_proxy: f64,
    pub term_i: f64,
    pub term_ii: f64,
    pub term_iii: f64,
    pub certificate: f64,
    /// Best value of the alternating solver on the catalog grid, when run.
    pub manifold_sup: Option<f64>,
}

impl TransplantReport {
    pub const CSV_HEADER: &'static str = "lambda,delta,epsilon,I,II,III,certificate,quotient,n_proxy,manifold_sup";

    pub fn csv_row(&self) -> String {
        let sup = self.manifold_sup.map(|v| v.to_string()).unwrap_or_default();
        format!(
            "{},{},{},{},{},{},{},{},{},{}",
            self.lambda,
            self.delta,
            self.distortion,
            self.term_i,
            self.term_ii,
            self.term_iii,
            self.certificate,
            self.quotient,
            self.n_proxy,
            sup
        )
    }
}

pub fn write_reports_csv<W: Write>(reports: &[TransplantReport], mut out: W) -> Result<()> {
    writeln!(out, "{}", TransplantReport::CSV_HEADER)?;
    for r in reports {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

/// Settings for a `λ` sweep on top of a precomputed baseline.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub center: Point,
    pub delta: f64,
    /// Strictly decreasing.
    pub lambdas: Vec<f64>,
    /// `(max_iter, tol)` for the manifold supremum on the catalog grid;
    /// `None` skips it.
    pub manifold_solver: Option<(usize, f64)>,
}

/// Geometric `λ` grid `start, start/2, …` with `count` points.
pub fn geometric_lambdas(start: f64, count: usize) -> Vec<f64> {
    (0..count).map(|k| start * 0.5f64.powi(k as i32)).collect()
}

/// Default chart radius: half the injectivity radius.
pub fn default_chart_radius(spec: &ManifoldSpec) -> f64 {
    0.5 * spec.injectivity_radius()
}

/// Runs the sweep for a baseline pair on the catalog grid `global`.
pub fn sweep_with_baseline(
    global: &QuadratureGrid,
    baseline: &Baseline,
    settings: &SweepSettings,
) -> Result<Vec<TransplantReport>> {
    let spec = global.spec();
    let exps = baseline.exponents;
    if exps.n != spec.dimension() {
        return Err(HlsError::Usage(format!(
            "baseline is {}-dimensional, manifold {spec} is {}-dimensional",
            exps.n,
            spec.dimension()
        )));
    }
    if settings.lambdas.is_empty() || settings.lambdas.iter().any(|l| !(*l > 0.0)) {
        return Err(HlsError::Usage("lambda grid must be nonempty and positive".into()));
    }
    if settings.lambdas.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HlsError::Usage(format!("lambda grid must be strictly decreasing: {:?}", settings.lambdas)));
    }
    let chart = NormalChart::new(spec, settings.center, settings.delta)?;
    let prefactor = certificate_prefactor(&exps, chart.distortion());
    let n_proxy = baseline.result.n_estimate;
    let riesz = RieszKernel::new(spec, exps.alpha)?;
    let manifold_sup = match settings.manifold_solver {
        Some((max_iter, tol)) => {
            Some(catalog_supremum(global, &riesz, &exps, &settings.center, settings.delta, max_iter, tol)?)
        }
        None => None,
    };

    let mut reports = Vec::with_capacity(settings.lambdas.len());
    for &lambda in &settings.lambdas {
        let pair = scaled_pair(baseline, lambda)?;
        let (term_i, term_ii, term_iii) =
            correction_terms(&pair.grid, &pair.kernel, &pair.f, &pair.g, settings.delta, n_proxy, &exps)?;
        let truncated = truncate_pair(&pair, settings.delta, &exps)?;
        let moved = transplant(global, &chart, &truncated)?;
        let kernel = assemble_kernel(&riesz, &moved.grid, None)?;
        let (u, v) = (moved.u.values(), moved.v.values());
        let quotient =
            kernel.bilinear(&moved.grid, u, v)? / (lp_norm(&moved.grid, u, exps.p)? * lp_norm(&moved.grid, v, exps.t)?);
        reports.push(TransplantReport {
            lambda,
            delta: settings.delta,
            distortion: chart.distortion(),
            quotient,
            n_proxy,
            term_i,
            term_ii,
            term_iii,
            certificate: prefactor * (n_proxy - term_i - term_ii),
            manifold_sup,
        });
    }
    Ok(reports)
}

/// Direct estimate of the manifold constant on the catalog grid: the best
/// of the alternating solver started from `g ≡ 1` and from a bump of width
/// `delta / 2` at `center`. Every iterate value is attained, so this is a
/// lower bound for the discrete supremum.
pub fn catalog_supremum(
    global: &QuadratureGrid,
    riesz: &RieszKernel,
    exponents: &Exponents,
    center: &Point,
    delta: f64,
    max_iter: usize,
    tol: f64,
) -> Result<f64> {
    let spec = global.spec();
    let kernel = assemble_kernel(riesz, global, None)?;
    let cfg = SolverConfig::new(*exponents, max_iter, tol, 0)?;
    let width = 0.5 * delta;
    let decay = -(exponents.n as f64 + exponents.alpha) / 2.0;
    let bump: Vec<f64> = global
        .nodes()
        .iter()
        .map(|x| {
            let d = spec.distance(center, x) / width;
            (1.0 + d * d).powf(decay)
        })
        .collect();
    let from_const = alternating_maximize(&kernel, global, &cfg, &vec![1.0; global.len()])?;
    let from_bump = alternating_maximize(&kernel, global, &cfg, &bump)?;
    Ok(from_const.n_estimate.max(from_bump.n_estimate))
}

/// Full sweep: Euclidean baseline on the ball of radius `ball_radius` with
/// `ball_resolution` cells per radius, catalog grid of `resolution`, then
/// [`sweep_with_baseline`].
#[allow(clippy::too_many_arguments)]
pub fn lower_bound_sweep(
    spec: &ManifoldSpec,
    alpha: f64,
    p: f64,
    resolution: usize,
    ball_radius: f64,
    ball_resolution: usize,
    solver: (usize, f64),
    settings: &SweepSettings,
) -> Result<Vec<TransplantReport>> {
    let baseline = euclidean_baseline(spec.dimension(), alpha, p, ball_radius, ball_resolution, solver.0, solver.1)?;
    let global = build_grid(spec, resolution)?;
    sweep_with_baseline(&global, &baseline, settings)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::riesz::critical_exponent;
    use approx::assert_relative_eq;

    fn small_baseline() -> Baseline {
        euclidean_baseline(2, 1.0, 1.5, 1.0, 6, 5000, 1e-10).unwrap()
    }

    #[test]
    fn prefactor_is_one_when_flat_and_below_one_otherwise() {
        let e = critical_exponent(2, 1.0, 1.5).unwrap();
        assert_eq!(certificate_prefactor(&e, 0.0), 1.0);
        let c = certificate_prefactor(&e, 0.01);
        assert!(c < 1.0 && c > 0.9);
        // exponent n/2 (1/p + 1/t) + n − α = 2.5 here
        assert_relative_eq!(c, 0.99f64.powi(2) / 1.01f64.powf(2.5), epsilon = 1e-15);
    }

    #[test]
    fn dilation_preserves_norms_and_value() {
        let b = small_baseline();
        let e = b.exponents;
        for lambda in [0.5, 0.1] {
            let s = scaled_pair(&b, lambda).unwrap();
            assert_relative_eq!(lp_norm(&s.grid, &s.f, e.p).unwrap(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(lp_norm(&s.grid, &s.g, e.t).unwrap(), 1.0, epsilon = 1e-12);
            assert_relative_eq!(
                s.kernel.bilinear(&s.grid, &s.f, &s.g).unwrap(),
                b.result.n_estimate,
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn truncation_partitions_mass() {
        let b = small_baseline();
        let f = b.result.f.values();
        let w = b.grid.weights();
        let full = lp_mass(w, f, 1.5);
        assert_eq!(truncate(&b.grid, f, 2.0, 1.5).unwrap().values(), f);
        let cut = truncate(&b.grid, f, 0.5, 1.5).unwrap();
        let outside: f64 = b
            .grid
            .nodes()
            .iter()
            .zip(w.iter().zip(f))
            .filter(|(x, _)| norm3(x) >= 0.5)
            .map(|(_, (w, v))| w * v.powf(1.5))
            .sum();
        assert_relative_eq!(lp_mass(w, cut.values(), 1.5) + outside, full, max_relative = 1e-14);
        let tiny = truncate(&b.grid, f, 1e-3, 1.5).unwrap();
        assert_eq!(lp_mass(w, tiny.values(), 1.5), 0.0);
    }

    #[test]
    fn chart_and_truncation_radius_must_agree() {
        let b = small_baseline();
        let spec = ManifoldSpec::torus(&[1.0, 1.0]).unwrap();
        let global = build_grid(&spec, 16).unwrap();
        let chart = NormalChart::new(&spec, [0.5, 0.5, 0.0], 0.2).unwrap();
        let pair = truncate_pair(&scaled_pair(&b, 0.1).unwrap(), 0.15, &b.exponents).unwrap();
        assert!(matches!(transplant(&global, &chart, &pair), Err(HlsError::Usage(_))));
    }

    #[test]
    fn flat_chart_keeps_euclidean_norms_and_support() {
        let b = small_baseline();
        let e = b.exponents;
        let spec = ManifoldSpec::torus(&[1.0, 1.0]).unwrap();
        let global = build_grid(&spec, 16).unwrap();
        let center = [0.3, 0.7, 0.0];
        let chart = NormalChart::new(&spec, center, 0.2).unwrap();
        let pair = truncate_pair(&scaled_pair(&b, 0.3).unwrap(), 0.2, &e).unwrap();
        let moved = transplant(&global, &chart, &pair).unwrap();
        assert_relative_eq!(
            lp_norm(&moved.grid, moved.u.values(), e.p).unwrap(),
            pair.f.norm(&pair.grid).unwrap(),
            max_relative = 1e-12
        );
        for (x, v) in moved.grid.nodes().iter().zip(moved.u.values()) {
            if spec.distance(x, &center) >= 0.2 {
                assert_eq!(*v, 0.0);
            }
        }
    }

    #[test]
    fn sweep_rejects_increasing_lambdas() {
        let b = small_baseline();
        let spec = ManifoldSpec::torus(&[1.0, 1.0]).unwrap();
        let global = build_grid(&spec, 16).unwrap();
        let settings =
            SweepSettings { center: [0.5, 0.5, 0.0], delta: 0.25, lambdas: vec![0.1, 0.2], manifold_solver: None };
        assert!(matches!(sweep_with_baseline(&global, &b, &settings), Err(HlsError::Usage(_))));
    }

    #[test]
    fn flat_certificate_is_proxy_minus_tails() {
        let b = small_baseline();
        let spec = ManifoldSpec::torus(&[1.0, 1.0]).unwrap();
        let global = build_grid(&spec, 16).unwrap();
        let settings = SweepSettings {
            center: [0.5, 0.5, 0.0],
            delta: 0.25,
            lambdas: geometric_lambdas(0.4, 3),
            manifold_solver: None,
        };
        let reports = sweep_with_baseline(&global, &b, &settings).unwrap();
        assert_eq!(reports.len(), 3);
        for r in &reports {
            assert_eq!(r.certificate, r.n_proxy - r.term_i - r.term_ii);
            assert!(r.term_i >= 0.0 && r.term_ii >= 0.0 && r.term_iii >= 0.0);
        }
        let last = reports.last().unwrap();
        assert_eq!(last.term_i, 0.0);
        assert_eq!(last.certificate, last.n_proxy);
        let mut buf = Vec::new();
        write_reports_csv(&reports, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 4);
    }
}
