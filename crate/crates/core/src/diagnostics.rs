//! Concentration diagnostics for maximizing sequences.
//!
//! Sequences are explicit surrogate families (concentrating bubbles,
//! spreading fields, oscillations) whose limits are known by construction.
//! For each member the node measures `μ = w|f|^p` and `ν = w|I_α f|^q` are
//! formed; atoms are read off as local masses at the smallest radius of a
//! user-given schedule.

use std::io::Write;

use rayon::prelude::*;

use crate::error::{HlsError, Result};
use crate::grid::QuadratureGrid;
use crate::manifold::{ManifoldSpec, Point};
use crate::riesz::{lp_norm, tail_norm, weighted, KernelMatrix, KernelPart};

/// Per-node measures of a field and of its potential.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurePair {
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub mu_total: f64,
    pub nu_total: f64,
}

pub fn build_measures(grid: &QuadratureGrid, k: &KernelMatrix, f: &[f64], p: f64, q: f64) -> Result<MeasurePair> {
    if !(p >= 1.0 && q >= 1.0) {
        return Err(HlsError::Exponent(format!("measure exponents must be >= 1, got p={p}, q={q}")));
    }
    let image = k.apply(grid, f)?;
    let w = grid.weights();
    let mu: Vec<f64> = w.iter().zip(f).map(|(w, v)| w * v.abs().powf(p)).collect();
    let nu: Vec<f64> = w.iter().zip(&image).map(|(w, v)| w * v.abs().powf(q)).collect();
    Ok(MeasurePair { mu_total: mu.iter().sum(), nu_total: nu.iter().sum(), mu, nu })
}

/// Sum of `values` over nodes within distance `r` of `center`.
pub fn local_mass(grid: &QuadratureGrid, values: &[f64], center: &Point, r: f64) -> Result<f64> {
    if values.len() != grid.len() {
        return Err(HlsError::Usage("measure and grid sizes differ".into()));
    }
    if !(r > 0.0) {
        return Err(HlsError::Domain(format!("radius must be > 0, got {r}")));
    }
    grid.spec().check_point(center)?;
    let spec = grid.spec();
    Ok(grid.nodes().iter().zip(values).filter(|(x, _)| spec.distance(center, x) <= r).map(|(_, v)| v).sum())
}

/// Polynomial bump `φ_λ(x) = (1 − (d(P,x)/λ)²)²`, zero beyond `λ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CutoffFamily {
    pub center: Point,
    pub scale: f64,
}

impl CutoffFamily {
    pub fn new(spec: &ManifoldSpec, center: Point, scale: f64) -> Result<Self> {
        spec.check_point(&center)?;
        if !(scale > 0.0) {
            return Err(HlsError::Domain(format!("cutoff scale must be > 0, got {scale}")));
        }
        Ok(Self { center, scale })
    }

    pub fn value(&self, spec: &ManifoldSpec, x: &Point) -> f64 {
        let s = spec.distance(&self.center, x) / self.scale;
        if s >= 1.0 {
            0.0
        } else {
            let b = 1.0 - s * s;
            b * b
        }
    }

    pub fn values(&self, grid: &QuadratureGrid) -> Vec<f64> {
        grid.nodes().iter().map(|x| self.value(grid.spec(), x)).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AtomReport {
    pub node: usize,
    pub location: Point,
    /// Local masses at the smallest schedule radius.
    pub mu: f64,
    pub nu: f64,
    /// Local `μ` mass at each schedule radius, in schedule order.
    pub mu_profile: Vec<f64>,
    /// Local `μ` mass at `location` for each member of the sequence.
    pub mu_history: Vec<f64>,
    /// `N μ^{1/p} − ν^{1/q}` against the constant passed to [`detect_atoms`].
    pub slack: f64,
}

/// Finds concentration points of the last member of a sequence of measure
/// pairs on grids of one manifold.
///
/// Repeatedly takes the node whose `r_min`-ball carries the most `μ` mass,
/// recentres on the heaviest node inside that ball, and accepts it when the
/// local mass exceeds `θ` times the total. Nodes within `2 r_min` of an
/// accepted atom are excluded afterwards. The result is always finite.
pub fn detect_atoms(
    sequence: &[(&QuadratureGrid, &MeasurePair)],
    radii: &[f64],
    theta: f64,
    constant: f64,
    p: f64,
    q: f64,
) -> Result<Vec<AtomReport>> {
    let (last_grid, last) = *sequence.last().ok_or_else(|| HlsError::Usage("empty measure sequence".into()))?;
    let spec = last_grid.spec();
    for (grid, m) in sequence {
        if grid.spec() != spec {
            return Err(HlsError::Usage(format!("measure sequence mixes manifolds: {} and {spec}", grid.spec())));
        }
        if m.mu.len() != grid.len() || m.nu.len() != grid.len() {
            return Err(HlsError::Usage("measure and grid sizes differ".into()));
        }
    }
    if !(theta > 0.0 && theta < 1.0) {
        return Err(HlsError::Usage(format!("threshold must lie in (0, 1), got {theta}")));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(HlsError::Usage("radius schedule must be nonempty and positive".into()));
    }
    let r_min = radii.iter().copied().fold(f64::INFINITY, f64::min);
    let nodes = last_grid.nodes();
    let mass_at = |x: &Point, r: f64| -> f64 {
        nodes.iter().zip(&last.mu).filter(|(y, _)| spec.distance(x, y) <= r).map(|(_, v)| v).sum()
    };
    let local: Vec<f64> = nodes.par_iter().map(|x| mass_at(x, r_min)).collect();
    let mut excluded = vec![false; nodes.len()];
    let mut atoms = Vec::new();
    while let Some(best) = (0..nodes.len()).filter(|&i| !excluded[i]).max_by(|&a, &b| local[a].total_cmp(&local[b])) {
        if local[best] <= theta * last.mu_total || local[best] == 0.0 {
            break;
        }
        let node = (0..nodes.len())
            .filter(|&j| !excluded[j] && spec.distance(&nodes[best], &nodes[j]) <= r_min)
            .max_by(|&a, &b| last.mu[a].total_cmp(&last.mu[b]))
            .unwrap_or(best);
        let location = nodes[node];
        let mu = mass_at(&location, r_min);
        let nu: f64 =
            nodes.iter().zip(&last.nu).filter(|(y, _)| spec.distance(&location, y) <= r_min).map(|(_, v)| v).sum();
        let mu_profile = radii.iter().map(|&r| mass_at(&location, r)).collect();
        let mu_history =
            sequence.iter().map(|(g, m)| local_mass(g, &m.mu, &location, r_min)).collect::<Result<Vec<_>>>()?;
        for (j, x) in nodes.iter().enumerate() {
            if spec.distance(&location, x) <= 2.0 * r_min {
                excluded[j] = true;
            }
        }
        excluded[best] = true;
        atoms.push(AtomReport {
            node,
            location,
            mu,
            nu,
            mu_profile,
            mu_history,
            slack: constant * mu.powf(1.0 / p) - nu.powf(1.0 / q),
        });
    }
    Ok(atoms)
}

/// Slack of the atom inequality `ν^{1/q} ≤ N μ^{1/p}` for a given constant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AtomSlack {
    /// `N μ^{1/p} − ν^{1/q}`.
    pub slack: f64,
    /// `slack / (N μ^{1/p})`, or 0 when `μ = 0`.
    pub relative: f64,
}

pub fn check_atom_inequality(report: &AtomReport, constant: f64, p: f64, q: f64) -> Result<AtomSlack> {
    if !(constant > 0.0) {
        return Err(HlsError::Usage(format!("constant must be > 0, got {constant}")));
    }
    let scale = constant * report.mu.powf(1.0 / p);
    let slack = scale - report.nu.powf(1.0 / q);
    Ok(AtomSlack { slack, relative: if scale > 0.0 { slack / scale } else { 0.0 } })
}

/// `Σ w (|I f_m|^q − |I(f_m − f)|^q − |I f|^q)`.
pub fn brezis_lieb_defect(k: &KernelMatrix, grid: &QuadratureGrid, f_m: &[f64], f: &[f64], q: f64) -> Result<f64> {
    let diff: Vec<f64> = f_m.iter().zip(f).map(|(a, b)| a - b).collect();
    let a = k.apply(grid, f_m)?;
    let b = k.apply(grid, &diff)?;
    let c = k.apply(grid, f)?;
    Ok(grid
        .weights()
        .iter()
        .enumerate()
        .map(|(i, w)| w * (a[i].abs().powf(q) - b[i].abs().powf(q) - c[i].abs().powf(q)))
        .sum())
}

/// `‖φ · I_α f − I_α(φ f)‖_q`, evaluated through the commutator kernel
/// `(φ_i − φ_j) K_ij`. The diagonal cells cancel exactly.
pub fn commutator_norm(k: &KernelMatrix, grid: &QuadratureGrid, phi: &[f64], f: &[f64], q: f64) -> Result<f64> {
    if phi.len() != grid.len() || f.len() != grid.len() || k.size() != grid.len() {
        return Err(HlsError::Usage("cutoff, field, kernel and grid sizes must agree".into()));
    }
    let wf = weighted(grid.weights(), f);
    let out: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|i| {
            let row = k.row(i);
            row.iter().zip(&wf).zip(phi).map(|((kij, v), pj)| kij * v * (phi[i] - pj)).sum()
        })
        .collect();
    lp_norm(grid, &out, q)
}

/// One row of the near/far table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitRow {
    pub rho: f64,
    pub member: usize,
    /// `‖K^ρ (f_m − f)‖_r`.
    pub far_diff: f64,
    /// `‖K_ρ (f_m − f)‖_r`.
    pub near_norm: f64,
    /// `tail_norm(ρ, s) · ‖f_m − f‖_p`.
    pub near_bound: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SplitTable {
    pub s: f64,
    pub rows: Vec<SplitRow>,
    /// `(ρ, tail_norm(ρ, s))` per schedule radius.
    pub tails: Vec<(f64, f64)>,
    pub slope: f64,
    /// `(α − n) + n/s`.
    pub expected_slope: f64,
}

impl SplitTable {
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "rho,member,far_diff,near_norm,near_bound")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{},{}", r.rho, r.member, r.far_diff, r.near_norm, r.near_bound)?;
        }
        Ok(())
    }
}

/// Near/far decomposition of `I_α (f_m − f)` along a sequence, with `s`
/// from `1/r + 1 = 1/p + 1/s`. Needs `p ≤ r < q`.
pub fn compactness_split_check(
    k: &KernelMatrix,
    grid: &QuadratureGrid,
    sequence: &[Vec<f64>],
    f: &[f64],
    rhos: &[f64],
    p: f64,
    r: f64,
) -> Result<SplitTable> {
    let (n, alpha) = (k.dim() as f64, k.alpha());
    if !(p > 1.0 && p < n / alpha) {
        return Err(HlsError::Exponent(format!("need 1 < p < n/alpha = {}, got {p}", n / alpha)));
    }
    let q = 1.0 / (1.0 / p - alpha / n);
    if !(r >= p && r < q) {
        return Err(HlsError::Exponent(format!("need p <= r < q = {q}, got r={r}")));
    }
    let s = 1.0 / (1.0 / r + 1.0 - 1.0 / p);
    if rhos.len() < 2 {
        return Err(HlsError::Usage("need at least two radii".into()));
    }
    let mut rows = Vec::new();
    let mut tails = Vec::new();
    for &rho in rhos {
        let tail = tail_norm(k, grid, rho, s)?;
        tails.push((rho, tail));
        for (member, fm) in sequence.iter().enumerate() {
            let diff: Vec<f64> = fm.iter().zip(f).map(|(a, b)| a - b).collect();
            let far = k.apply_part(grid, &diff, KernelPart::Far(rho))?;
            let near = k.apply_part(grid, &diff, KernelPart::Near(rho))?;
            rows.push(SplitRow {
                rho,
                member,
                far_diff: lp_norm(grid, &far, r)?,
                near_norm: lp_norm(grid, &near, r)?,
                near_bound: tail * lp_norm(grid, &diff, p)?,
            });
        }
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = tails.iter().map(|(r, t)| (r.ln(), t.ln())).unzip();
    Ok(SplitTable { s, rows, tails, slope: fit_slope(&xs, &ys), expected_slope: (alpha - n) + n / s })
}

/// Least-squares slope of `ys` against `xs`.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let m = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / m;
    let my = ys.iter().sum::<f64>() / m;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Left and right sides of the final strict-concavity step for a split of
/// unit `p`-mass into a profile part and atoms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainCheck {
    /// `N_M^q a^{q/p} + Σ N^q μ_j^{q/p}`.
    pub value: f64,
    /// `N_M^q`.
    pub bound: f64,
    pub strict: bool,
}

/// Evaluates the chain for profile mass `a = ∫|f|^p` and atom masses `μ_j`
/// with `a + Σ μ_j = 1`, given `N_M > N > 0`.
pub fn contradiction_chain(
    n_manifold: f64,
    n_proxy: f64,
    profile_mass: f64,
    atoms: &[f64],
    p: f64,
    q: f64,
) -> Result<ChainCheck> {
    if !(n_proxy > 0.0 && n_manifold > n_proxy) {
        return Err(HlsError::Usage(format!("need N_M > N > 0, got {n_manifold} and {n_proxy}")));
    }
    if !(q > p && p > 1.0) {
        return Err(HlsError::Exponent(format!("need q > p > 1, got p={p}, q={q}")));
    }
    if atoms.is_empty() || atoms.iter().any(|m| !(*m > 0.0)) || !(profile_mass >= 0.0) {
        return Err(HlsError::Usage("need at least one atom, all atom masses > 0 and profile mass >= 0".into()));
    }
    let total = profile_mass + atoms.iter().sum::<f64>();
    if (total - 1.0).abs() > 1e-12 {
        return Err(HlsError::Usage(format!("masses must sum to 1, got {total}")));
    }
    let e = q / p;
    let bound = n_manifold.powf(q);
    let value = bound * profile_mass.powf(e) + n_proxy.powf(q) * atoms.iter().map(|m| m.powf(e)).sum::<f64>();
    Ok(ChainCheck { value, bound, strict: value < bound })
}
