//! Discretized Riesz potential `I_α f(x) = ∫ f(y) d(x,y)^{α−n} dV_y`.
//!
//! Off-diagonal entries are the point kernel `d(x_i, x_j)^{α−n}`. The
//! diagonal carries the cell average of the kernel over a geodesic disk of
//! the node's effective radius `h_i = (w_i/ω_n)^{1/n}`:
//!
//! ```text
//! c_i = (1/|B_h|) ∫_{B_h} |y|^{α−n} dy = (n/α) · h_i^{α−n}
//! (I_α f)_i = Σ_{j≠i} K_ij w_j f_j + c_i w_i f_i
//! ```

use std::io::Write;

use rayon::prelude::*;

use crate::error::{HlsError, Result};
use crate::grid::QuadratureGrid;
use crate::manifold::{unit_ball_volume, ManifoldSpec};

/// Admissible exponent triple for `I_α : L^p → L^q`, with `t` the dual of `q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Exponents {
    pub n: usize,
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    pub t: f64,
}

/// `1/q = 1/p − α/n`, `t = q/(q−1)`.
pub fn critical_exponent(n: usize, alpha: f64, p: f64) -> Result<Exponents> {
    let nf = n as f64;
    if n == 0 || !(alpha > 0.0 && alpha < nf) {
        return Err(HlsError::Config(format!("need 0 < alpha < n, got alpha = {alpha}, n = {n}")));
    }
    if !p.is_finite() || p <= 1.0 || p * alpha >= nf {
        return Err(HlsError::Exponent(format!("need 1 < p < n/alpha = {}, got p = {p}", nf / alpha)));
    }
    let inv_q = 1.0 / p - alpha / nf;
    let q = 1.0 / inv_q;
    let t = q / (q - 1.0);
    Ok(Exponents { n, alpha, p, q, t })
}

/// Sharp-Hölder dual exponent `p/(p−1)`.
pub fn dual_exponent(p: f64) -> f64 {
    p / (p - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RieszKernel {
    alpha: f64,
    dim: usize,
}

impl RieszKernel {
    pub fn new(spec: &ManifoldSpec, alpha: f64) -> Result<Self> {
        let n = spec.dimension();
        if !(alpha > 0.0 && alpha < n as f64) {
            return Err(HlsError::Config(format!("need 0 < alpha < n = {n}, got {alpha}")));
        }
        Ok(Self { alpha, dim: n })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// `n − α`; the kernel is `d^{−(n−α)}`.
    pub fn exponent(&self) -> f64 {
        self.dim as f64 - self.alpha
    }
}

/// Nonnegative values on grid nodes tagged with their Lebesgue exponent.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityField {
    values: Vec<f64>,
    exponent: f64,
}

impl DensityField {
    pub fn new(values: Vec<f64>, exponent: f64) -> Result<Self> {
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(HlsError::Domain(format!("density values must be finite and >= 0, got {v}")));
        }
        if !(exponent.is_finite() && exponent >= 1.0) {
            return Err(HlsError::Exponent(format!("density exponent must be >= 1, got {exponent}")));
        }
        Ok(Self { values, exponent })
    }

    pub fn constant(len: usize, value: f64, exponent: f64) -> Result<Self> {
        Self::new(vec![value; len], exponent)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn norm(&self, grid: &QuadratureGrid) -> Result<f64> {
        lp_norm(grid, &self.values, self.exponent)
    }
}

/// `(Σ_i w_i |f_i|^p)^{1/p}`.
pub fn lp_norm(grid: &QuadratureGrid, f: &[f64], p: f64) -> Result<f64> {
    if f.len() != grid.len() {
        return Err(HlsError::Usage(format!("field has {} values, grid has {} nodes", f.len(), grid.len())));
    }
    if !(p >= 1.0) {
        return Err(HlsError::Exponent(format!("lp_norm needs p >= 1, got {p}")));
    }
    Ok(lp_norm_unchecked(grid.weights(), f, p))
}

pub(crate) fn lp_norm_unchecked(w: &[f64], f: &[f64], p: f64) -> f64 {
    lp_mass(w, f, p).powf(1.0 / p)
}

/// `Σ_i w_i |f_i|^p`.
pub(crate) fn lp_mass(w: &[f64], f: &[f64], p: f64) -> f64 {
    w.iter().zip(f).map(|(w, v)| w * v.abs().powf(p)).sum()
}

/// Which part of the kernel a matvec uses, relative to a split radius `ρ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum KernelPart {
    Full,
    /// `K_ρ`: distances `≤ ρ`, including the diagonal cell.
    Near(f64),
    /// `K^ρ`: distances `> ρ`.
    Far(f64),
}

/// Dense symmetric kernel matrix with diagonal singularity corrections.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    size: usize,
    alpha: f64,
    dim: usize,
    /// Row-major, zero on the diagonal.
    entries: Vec<f64>,
    diag: Vec<f64>,
    split: Option<f64>,
}

/// Assembles `d(x_i,x_j)^{α−n}` over all node pairs plus the diagonal
/// corrections. The optional `split_radius` only tags the matrix; near/far
/// parts are evaluated on demand.
pub fn assemble_kernel(kernel: &RieszKernel, grid: &QuadratureGrid, split_radius: Option<f64>) -> Result<KernelMatrix> {
    let spec = grid.spec();
    if spec.dimension() != kernel.dim {
        return Err(HlsError::Usage(format!("kernel is for dimension {}, grid lives on {spec}", kernel.dim)));
    }
    if let Some(rho) = split_radius {
        if !(rho > 0.0 && rho < spec.diameter()) {
            return Err(HlsError::Domain(format!("split radius must lie in (0, {}), got {rho}", spec.diameter())));
        }
    }
    let n = grid.len();
    let power = kernel.alpha - kernel.dim as f64;
    let nodes = grid.nodes();
    let mut entries = vec![0.0; n * n];
    // Upper triangle in parallel, then mirror so symmetry is exact.
    entries.par_chunks_mut(n).enumerate().for_each(|(i, row)| {
        let xi = &nodes[i];
        for j in (i + 1)..n {
            row[j] = spec.distance(xi, &nodes[j]).powf(power);
        }
    });
    for i in 0..n {
        for j in 0..i {
            entries[i * n + j] = entries[j * n + i];
        }
    }
    if let Some(bad) = entries.iter().enumerate().find(|(idx, v)| idx % (n + 1) != 0 && !(v.is_finite() && **v > 0.0)) {
        let (i, j) = (bad.0 / n, bad.0 % n);
        return Err(HlsError::Domain(format!("nodes {i} and {j} coincide; kernel entry is {}", bad.1)));
    }
    let diag = grid.weights().iter().map(|&w| self_cell_average(w, kernel.alpha, kernel.dim)).collect();
    Ok(KernelMatrix { size: n, alpha: kernel.alpha, dim: kernel.dim, entries, diag, split: split_radius })
}

/// `(n/α) h^{α−n}` with `h = (w/ω_n)^{1/n}`.
pub fn self_cell_average(weight: f64, alpha: f64, dim: usize) -> f64 {
    let h = effective_radius(weight, dim);
    dim as f64 / alpha * h.powf(alpha - dim as f64)
}

fn effective_radius(weight: f64, dim: usize) -> f64 {
    (weight / unit_ball_volume(dim)).powf(1.0 / dim as f64)
}

impl KernelMatrix {
    /// Kernel from explicit symmetric positive entries (the diagonal of
    /// `entries` is ignored; `diag` supplies it).
    pub fn from_dense(entries: Vec<f64>, diag: Vec<f64>, alpha: f64, dim: usize) -> Result<Self> {
        let n = diag.len();
        if entries.len() != n * n {
            return Err(HlsError::Usage(format!("{} entries for a {n}x{n} kernel", entries.len())));
        }
        let mut entries = entries;
        for i in 0..n {
            entries[i * n + i] = 0.0;
            for j in 0..n {
                let v = entries[i * n + j];
                if i != j && !(v.is_finite() && v > 0.0) {
                    return Err(HlsError::Domain(format!("kernel entry ({i},{j}) = {v} is not positive")));
                }
                if v != entries[j * n + i] {
                    return Err(HlsError::Domain(format!("kernel is not symmetric at ({i},{j})")));
                }
            }
        }
        if let Some(d) = diag.iter().find(|d| !(d.is_finite() && **d > 0.0)) {
            return Err(HlsError::Domain(format!("diagonal value {d} is not positive")));
        }
        Ok(Self { size: n, alpha, dim, entries, diag, split: None })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn split_radius(&self) -> Option<f64> {
        self.split
    }

    /// Off-diagonal entry `K_ij` (zero on the diagonal).
    #[inline]
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.size + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.size..(i + 1) * self.size]
    }

    /// Diagonal correction `c_i`.
    pub fn diag(&self, i: usize) -> f64 {
        self.diag[i]
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }

    /// Threshold on entries equivalent to `d ≤ ρ`.
    /// Kernel of the grid dilated by `λ`: every entry, diagonal included,
    /// scales by `λ^{α−n}`.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(HlsError::Domain(format!("dilation factor must be > 0, got {lambda}")));
        }
        let s = lambda.powf(self.alpha - self.dim as f64);
        Ok(Self {
            size: self.size,
            alpha: self.alpha,
            dim: self.dim,
            entries: self.entries.iter().map(|v| v * s).collect(),
            diag: self.diag.iter().map(|v| v * s).collect(),
            split: self.split.map(|r| r * lambda),
        })
    }

    fn near_threshold(&self, rho: f64) -> f64 {
        rho.powf(self.alpha - self.dim as f64)
    }

    /// Far part `K^ρ` entry for the stored split radius.
    pub fn far_entry(&self, i: usize, j: usize) -> f64 {
        let rho = self.split.unwrap_or(0.0);
        let k = self.entry(i, j);
        if i != j && (rho == 0.0 || k < self.near_threshold(rho)) {
            k
        } else {
            0.0
        }
    }

    /// Near part `K_ρ` entry; the diagonal is reported as `c_i`.
    pub fn near_entry(&self, i: usize, j: usize) -> f64 {
        if i == j {
            return self.diag[i];
        }
        self.entry(i, j) - self.far_entry(i, j)
    }

    fn check_dims(&self, grid: &QuadratureGrid, f: &[f64]) -> Result<()> {
        if grid.len() != self.size || f.len() != self.size {
            return Err(HlsError::Usage(format!(
                "kernel is {0}x{0}, grid has {1} nodes, field has {2} values",
                self.size,
                grid.len(),
                f.len()
            )));
        }
        Ok(())
    }

    /// `(I_α f)_i = Σ_j K_ij w_j f_j + c_i w_i f_i`.
    pub fn apply(&self, grid: &QuadratureGrid, f: &[f64]) -> Result<Vec<f64>> {
        self.apply_part(grid, f, KernelPart::Full)
    }

    pub fn apply_part(&self, grid: &QuadratureGrid, f: &[f64], part: KernelPart) -> Result<Vec<f64>> {
        self.check_dims(grid, f)?;
        Ok(self.apply_weighted(&weighted(grid.weights(), f), part))
    }

    /// Matvec against precomputed `w ∘ f`. Each row is summed sequentially,
    /// so the result does not depend on the thread count.
    pub(crate) fn apply_weighted(&self, wf: &[f64], part: KernelPart) -> Vec<f64> {
        let n = self.size;
        let mut out = vec![0.0; n];
        match part {
            KernelPart::Full => out.par_iter_mut().enumerate().for_each(|(i, o)| {
                let row = self.row(i);
                let s: f64 = row.iter().zip(wf).map(|(k, v)| k * v).sum();
                *o = s + self.diag[i] * wf[i];
            }),
            KernelPart::Near(rho) => {
                let thr = self.near_threshold(rho);
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let row = self.row(i);
                    let s: f64 = row.iter().zip(wf).map(|(&k, v)| if k >= thr { k * v } else { 0.0 }).sum();
                    *o = s + self.diag[i] * wf[i];
                })
            }
            KernelPart::Far(rho) => {
                let thr = self.near_threshold(rho);
                out.par_iter_mut().enumerate().for_each(|(i, o)| {
                    let row = self.row(i);
                    *o = row.iter().zip(wf).map(|(&k, v)| if k < thr { k * v } else { 0.0 }).sum();
                })
            }
        }
        out
    }

    /// `Σ_ij w_i w_j f_i K_ij g_j` including the diagonal cells.
    pub fn bilinear(&self, grid: &QuadratureGrid, f: &[f64], g: &[f64]) -> Result<f64> {
        self.check_dims(grid, f)?;
        self.check_dims(grid, g)?;
        let ig = self.apply(grid, g)?;
        Ok(grid.weights().iter().zip(f).zip(&ig).map(|((w, a), b)| w * a * b).sum())
    }

    /// Debug dump: one `row,col,value` line per entry, diagonal as `c_i`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "row,col,value")?;
        for i in 0..self.size {
            for j in 0..self.size {
                let v = if i == j { self.diag[i] } else { self.entry(i, j) };
                writeln!(out, "{i},{j},{v}")?;
            }
        }
        Ok(())
    }
}

pub(crate) fn weighted(w: &[f64], f: &[f64]) -> Vec<f64> {
    w.iter().zip(f).map(|(w, v)| w * v).collect()
}

/// Convenience wrapper matching the operator notation.
pub fn apply_ialpha(k: &KernelMatrix, grid: &QuadratureGrid, f: &DensityField) -> Result<DensityField> {
    let out = k.apply(grid, f.values())?;
    // Positive kernel and nonnegative input: only rounding can go below 0.
    DensityField::new(out.into_iter().map(|v| v.max(0.0)).collect(), f.exponent())
}

/// `max_i (Σ_{j: d_ij ≤ ρ} w_j K_ij^s)^{1/s}`, the row norm of the near kernel.
///
/// The diagonal cell contributes `∫_{B_min(ρ,h_i)} |y|^{(α−n)s} dy`, so for
/// `ρ` below the node spacing only that term survives.
pub fn tail_norm(k: &KernelMatrix, grid: &QuadratureGrid, rho: f64, s: f64) -> Result<f64> {
    let n = k.dim as f64;
    let limit = n / (n - k.alpha);
    if !(s >= 1.0 && s < limit) {
        return Err(HlsError::Exponent(format!("tail_norm needs 1 <= s < n/(n-alpha) = {limit}, got {s}")));
    }
    if !(rho > 0.0) {
        return Err(HlsError::Domain(format!("tail radius must be > 0, got {rho}")));
    }
    if grid.len() != k.size {
        return Err(HlsError::Usage("grid and kernel sizes differ".into()));
    }
    let e = (k.alpha - n) * s + n;
    let omega = unit_ball_volume(k.dim);
    let thr = if rho >= grid.spec().diameter() { 0.0 } else { k.near_threshold(rho) };
    let w = grid.weights();
    let best = (0..k.size)
        .into_par_iter()
        .map(|i| {
            let row = k.row(i);
            let off: f64 = row
                .iter()
                .zip(w)
                .enumerate()
                .map(|(j, (&kij, wj))| if j != i && kij >= thr { wj * kij.powf(s) } else { 0.0 })
                .sum();
            let h = effective_radius(w[i], k.dim);
            let cell = n * omega / e * rho.min(h).powf(e);
            (off + cell).powf(1.0 / s)
        })
        .reduce(|| 0.0, f64::max);
    Ok(best)
}

/// Boundedness probe for the convolution `g * h` with the radial kernel
/// profile `h(d) = d^{α−n}`: returns `‖g*h‖_r / (‖g‖_q ‖h‖_p)`, where
/// `1 + 1/r = 1/q + 1/p` and `‖h‖_p` is the largest row norm.
pub fn young_check(grid: &QuadratureGrid, k: &KernelMatrix, g: &[f64], p: f64, q: f64, r: f64) -> Result<f64> {
    for (name, e) in [("p", p), ("q", q), ("r", r)] {
        if !(e > 1.0 && e.is_finite()) {
            return Err(HlsError::Usage(format!("young_check needs {name} in (1, inf), got {e}")));
        }
    }
    if (1.0 + 1.0 / r - 1.0 / q - 1.0 / p).abs() > 1e-12 {
        return Err(HlsError::Usage(format!("exponents violate 1 + 1/r = 1/q + 1/p: p={p}, q={q}, r={r}")));
    }
    let gq = lp_norm(grid, g, q)?;
    if gq == 0.0 {
        return Ok(0.0);
    }
    let conv = k.apply(grid, g)?;
    let hp = tail_norm(k, grid, grid.spec().diameter(), p)?;
    Ok(lp_norm(grid, &conv, r)? / (gq * hp))
}
