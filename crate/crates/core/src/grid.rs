//! Quadrature grids on catalog manifolds.
//!
//! * circle and tori: uniform lattices with exact weights;
//! * sphere: Fibonacci spiral with equal weights `4πR²/N`;
//! * Euclidean balls: cell centres of a cubic lattice (spacing `R/resolution`)
//!   lying inside the ball, with equal weights normalized to the exact volume.

use std::f64::consts::PI;
use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::error::{HlsError, Result};
use crate::manifold::{ManifoldKind, ManifoldSpec, Point};

/// Lattice bookkeeping for Euclidean-ball grids, used for interpolation.
#[derive(Debug, Clone, PartialEq)]
pub struct BallLattice {
    pub spacing: f64,
    pub cells_per_radius: usize,
    /// Node index per lattice cell, row-major over `(2·cells_per_radius)^dim`.
    cells: Vec<Option<u32>>,
}

impl BallLattice {
    fn side(&self) -> usize {
        2 * self.cells_per_radius
    }

    /// Node at integer lattice coordinates, if the cell centre lies in the ball.
    pub fn node_at(&self, idx: &[i64]) -> Option<usize> {
        let side = self.side() as i64;
        let mut flat = 0i64;
        for &k in idx {
            if k < 0 || k >= side {
                return None;
            }
            flat = flat * side + k;
        }
        self.cells[flat as usize].map(|i| i as usize)
    }

    /// Continuous lattice coordinate of `x` along one axis (node centres sit
    /// at integers).
    pub fn coord(&self, x: f64) -> f64 {
        x / self.spacing + self.cells_per_radius as f64 - 0.5
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureGrid {
    spec: ManifoldSpec,
    nodes: Vec<Point>,
    weights: Vec<f64>,
    mesh_size: f64,
    lattice: Option<BallLattice>,
}

impl QuadratureGrid {
    /// Grid from explicit nodes and weights. Catalog grids always have at
    /// least two nodes; hand-built grids (toy problems, imported CSVs) may
    /// have one.
    pub fn from_parts(spec: ManifoldSpec, nodes: Vec<Point>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() {
            return Err(HlsError::Config("grid needs at least one node".into()));
        }
        if nodes.len() != weights.len() {
            return Err(HlsError::Usage(format!("{} nodes but {} weights", nodes.len(), weights.len())));
        }
        if let Some(w) = weights.iter().find(|w| !(w.is_finite() && **w > 0.0)) {
            return Err(HlsError::Config(format!("quadrature weights must be positive, got {w}")));
        }
        for x in &nodes {
            spec.check_point(x)?;
        }
        let mesh_size = mesh_size(&spec, &nodes);
        Ok(Self { spec, nodes, weights, mesh_size, lattice: None })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn nodes(&self) -> &[Point] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Largest nearest-neighbour distance over all nodes.
    pub fn mesh_size(&self) -> f64 {
        self.mesh_size
    }

    pub fn total_weight(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn lattice(&self) -> Option<&BallLattice> {
        self.lattice.as_ref()
    }

    /// Copy of a Euclidean grid with nodes `λx` and weights `λⁿw`.
    pub fn dilated(&self, lambda: f64) -> Result<Self> {
        if !self.spec.kind().is_euclidean_ball() {
            return Err(HlsError::Usage("only Euclidean-ball grids can be dilated".into()));
        }
        if !(lambda.is_finite() && lambda > 0.0) {
            return Err(HlsError::Domain(format!("dilation factor must be > 0, got {lambda}")));
        }
        let n = self.spec.dimension() as i32;
        let radius = self.spec.radius().expect("balls have a radius") * lambda;
        let spec = ManifoldSpec::ball(self.spec.dimension(), radius)?;
        let nodes = self.nodes.iter().map(|x| [x[0] * lambda, x[1] * lambda, x[2] * lambda]).collect();
        let scale = lambda.powi(n);
        let weights = self.weights.iter().map(|w| w * scale).collect();
        let lattice = self.lattice.as_ref().map(|l| BallLattice {
            spacing: l.spacing * lambda,
            cells_per_radius: l.cells_per_radius,
            cells: l.cells.clone(),
        });
        Ok(Self { spec, nodes, weights, mesh_size: self.mesh_size * lambda, lattice })
    }

    /// CSV with one row per node: the coordinates in use, then the weight.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let k = self.spec.coord_len();
        let header: Vec<String> = (0..k).map(|i| format!("x{i}")).chain(["weight".to_string()]).collect();
        writeln!(out, "{}", header.join(","))?;
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            let row: Vec<String> = x[..k].iter().chain(std::iter::once(w)).map(|v| v.to_string()).collect();
            writeln!(out, "{}", row.join(","))?;
        }
        Ok(())
    }

    /// Reads the format produced by [`QuadratureGrid::write_csv`].
    pub fn read_csv<R: BufRead>(spec: ManifoldSpec, input: R) -> Result<Self> {
        let k = spec.coord_len();
        let mut nodes = Vec::new();
        let mut weights = Vec::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || line.starts_with('x') || line.starts_with('#') {
                continue;
            }
            let vals: std::result::Result<Vec<f64>, _> = line.split(',').map(|s| s.trim().parse::<f64>()).collect();
            let vals = vals.map_err(|e| HlsError::Parse { line: lineno + 1, message: e.to_string() })?;
            if vals.len() != k + 1 {
                return Err(HlsError::Parse {
                    line: lineno + 1,
                    message: format!("expected {} columns, got {}", k + 1, vals.len()),
                });
            }
            let mut x = [0.0; 3];
            x[..k].copy_from_slice(&vals[..k]);
            nodes.push(x);
            weights.push(vals[k]);
        }
        Self::from_parts(spec, nodes, weights)
    }
}

/// Deterministic catalog grid for `spec`.
///
/// `resolution` is the node count for circle and sphere, nodes per axis for
/// tori, and lattice cells per radius for Euclidean balls.
pub fn build_grid(spec: &ManifoldSpec, resolution: usize) -> Result<QuadratureGrid> {
    if resolution < 2 {
        return Err(HlsError::Config(format!("grid resolution must be >= 2, got {resolution}")));
    }
    let (nodes, weights, lattice) = match spec.kind() {
        ManifoldKind::Circle => {
            let r = spec.radius().unwrap();
            let nodes = (0..resolution).map(|k| [2.0 * PI * k as f64 / resolution as f64, 0.0, 0.0]).collect();
            (nodes, vec![2.0 * PI * r / resolution as f64; resolution], None)
        }
        ManifoldKind::Sphere2 => {
            let r = spec.radius().unwrap();
            (fibonacci_sphere(resolution, r), vec![4.0 * PI * r * r / resolution as f64; resolution], None)
        }
        ManifoldKind::Torus1 | ManifoldKind::Torus2 => {
            let periods = spec.periods().unwrap();
            let count = resolution
                .checked_pow(periods.len() as u32)
                .filter(|&c| c <= 4_000_000)
                .ok_or_else(|| HlsError::Config(format!("torus resolution {resolution} gives too many nodes")))?;
            let w = spec.volume() / count as f64;
            let nodes = (0..count)
                .map(|idx| {
                    let mut x = [0.0; 3];
                    let mut rem = idx;
                    for axis in (0..periods.len()).rev() {
                        x[axis] = periods[axis] * (rem % resolution) as f64 / resolution as f64;
                        rem /= resolution;
                    }
                    x
                })
                .collect();
            (nodes, vec![w; count], None)
        }
        ManifoldKind::Ball1 | ManifoldKind::Ball2 | ManifoldKind::Ball3 => {
            let (nodes, lattice) = ball_lattice(spec.dimension(), spec.radius().unwrap(), resolution)?;
            let w = spec.volume() / nodes.len() as f64;
            let count = nodes.len();
            (nodes, vec![w; count], Some(lattice))
        }
    };
    let mut grid = QuadratureGrid::from_parts(*spec, nodes, weights)?;
    grid.lattice = lattice;
    Ok(grid)
}

/// Golden-angle spiral with `z_k = 1 − (2k+1)/N`.
fn fibonacci_sphere(count: usize, radius: f64) -> Vec<Point> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|k| {
            let z = 1.0 - (2.0 * k as f64 + 1.0) / count as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let phi = golden * k as f64;
            [radius * rho * phi.cos(), radius * rho * phi.sin(), radius * z]
        })
        .collect()
}

fn ball_lattice(dim: usize, radius: f64, res: usize) -> Result<(Vec<Point>, BallLattice)> {
    let side = 2 * res;
    let total = side
        .checked_pow(dim as u32)
        .filter(|&c| c <= 8_000_000)
        .ok_or_else(|| HlsError::Config(format!("ball resolution {res} in dimension {dim} gives too many cells")))?;
    let h = radius / res as f64;
    let mut nodes = Vec::new();
    let mut cells = vec![None; total];
    for (flat, cell) in cells.iter_mut().enumerate() {
        let mut x = [0.0; 3];
        let mut rem = flat;
        for axis in (0..dim).rev() {
            let k = rem % side;
            rem /= side;
            x[axis] = (k as f64 + 0.5 - res as f64) * h;
        }
        if (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt() < radius {
            *cell = Some(nodes.len() as u32);
            nodes.push(x);
        }
    }
    Ok((nodes, BallLattice { spacing: h, cells_per_radius: res, cells }))
}

fn mesh_size(spec: &ManifoldSpec, nodes: &[Point]) -> f64 {
    if nodes.len() < 2 {
        return 0.0;
    }
    let nearest = |i: usize| -> f64 {
        let x = &nodes[i];
        match spec.kind() {
            ManifoldKind::Sphere2 => {
                // Largest dot product is the nearest neighbour.
                let (best, _) = nodes
                    .iter()
                    .enumerate()
                    .filter(|(j, _)| *j != i)
                    .map(|(j, y)| (j, x[0] * y[0] + x[1] * y[1] + x[2] * y[2]))
                    .fold((0, f64::NEG_INFINITY), |acc, cur| if cur.1 > acc.1 { cur } else { acc });
                spec.distance(x, &nodes[best])
            }
            _ => nodes
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != i)
                .map(|(_, y)| spec.distance(x, y))
                .fold(f64::INFINITY, f64::min),
        }
    };
    (0..nodes.len()).into_par_iter().map(nearest).reduce(|| 0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn circle_grid_is_uniform() {
        let g = build_grid(&ManifoldSpec::circle(1.0).unwrap(), 4).unwrap();
        assert_eq!(g.len(), 4);
        for w in g.weights() {
            assert_relative_eq!(*w, PI / 2.0, epsilon = 1e-15);
        }
        assert_relative_eq!(g.total_weight(), 2.0 * PI, epsilon = 1e-14);
        assert_relative_eq!(g.mesh_size(), PI / 2.0, epsilon = 1e-14);
    }

    #[test]
    fn torus1_grid_weights() {
        let g = build_grid(&ManifoldSpec::torus(&[1.0]).unwrap(), 10).unwrap();
        assert_eq!(g.len(), 10);
        assert!(g.weights().iter().all(|w| (w - 0.1).abs() < 1e-15));
        assert_relative_eq!(g.total_weight(), 1.0, epsilon = 1e-14);
    }

    #[test]
    fn torus2_grid_is_a_product_lattice() {
        let g = build_grid(&ManifoldSpec::torus(&[2.0, 1.0]).unwrap(), 8).unwrap();
        assert_eq!(g.len(), 64);
        assert_relative_eq!(g.total_weight(), 2.0, epsilon = 1e-14);
        assert_relative_eq!(g.mesh_size(), 0.125, epsilon = 1e-14);
    }

    #[test]
    fn sphere_weights_sum_to_area() {
        for n in [50, 500, 2000] {
            let g = build_grid(&ManifoldSpec::sphere2(1.0).unwrap(), n).unwrap();
            assert!((g.total_weight() - 4.0 * PI).abs() / (4.0 * PI) < 5e-3);
            for x in g.nodes() {
                assert!((x[0].hypot(x[1]).hypot(x[2]) - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn ball_grids_hit_the_exact_volume() {
        for (d, res) in [(1, 2), (2, 2), (2, 7), (3, 5)] {
            let spec = ManifoldSpec::ball(d, 1.5).unwrap();
            let g = build_grid(&spec, res).unwrap();
            assert_relative_eq!(g.total_weight(), spec.volume(), max_relative = 1e-12);
            assert!(g.len() >= 2);
        }
    }

    #[test]
    fn one_dimensional_ball_weights_equal_spacing() {
        let g = build_grid(&ManifoldSpec::ball(1, 1.0).unwrap(), 8).unwrap();
        assert_eq!(g.len(), 16);
        assert!(g.weights().iter().all(|w| (w - 0.125).abs() < 1e-15));
    }

    #[test]
    fn refinement_shrinks_mesh_size() {
        let spec = ManifoldSpec::sphere2(1.0).unwrap();
        let h: Vec<f64> = [100, 400, 1600].iter().map(|&n| build_grid(&spec, n).unwrap().mesh_size()).collect();
        assert!(h[0] > h[1] && h[1] > h[2], "{h:?}");
    }

    #[test]
    fn resolution_below_two_is_rejected() {
        let err = build_grid(&ManifoldSpec::circle(1.0).unwrap(), 1).unwrap_err();
        assert!(matches!(err, HlsError::Config(_)));
    }

    #[test]
    fn grids_are_deterministic() {
        let spec = ManifoldSpec::sphere2(1.0).unwrap();
        assert_eq!(build_grid(&spec, 300).unwrap(), build_grid(&spec, 300).unwrap());
    }

    #[test]
    fn csv_round_trip() {
        let spec = ManifoldSpec::torus(&[1.0, 2.0]).unwrap();
        let g = build_grid(&spec, 3).unwrap();
        let mut buf = Vec::new();
        g.write_csv(&mut buf).unwrap();
        let back = QuadratureGrid::read_csv(spec, buf.as_slice()).unwrap();
        assert_eq!(back.nodes(), g.nodes());
        assert_eq!(back.weights(), g.weights());
    }

    #[test]
    fn dilation_scales_weights_and_nodes() {
        let g = build_grid(&ManifoldSpec::ball(2, 1.0).unwrap(), 4).unwrap();
        let d = g.dilated(0.5).unwrap();
        assert_relative_eq!(d.total_weight(), g.total_weight() * 0.25, max_relative = 1e-14);
        assert_relative_eq!(d.nodes()[3][1], 0.5 * g.nodes()[3][1]);
        assert_relative_eq!(d.spec().radius().unwrap(), 0.5);
    }
}
