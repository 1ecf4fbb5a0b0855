//! Normal (exponential-map) charts with metric distortion bounds.

use crate::error::{HlsError, Result};
use crate::manifold::{norm3, ManifoldKind, ManifoldSpec, Point};

/// Metric distortion `ε` of the normal chart of radius `delta` at `center`:
/// `(1−ε)I ≤ g ≤ (1+ε)I` on the chart ball, which also bounds distance ratios
/// `d_g(exp u, exp v) / |u − v|` to `[1−ε, 1+ε]`.
///
/// On a round sphere of radius `R` the metric in normal coordinates is
/// `dr² + (R sin(r/R))² dθ²`, so `ε = 1 − (sin s / s)²` with `s = δ/R`.
/// Flat entries return 0.
pub fn metric_distortion(spec: &ManifoldSpec, center: &Point, delta: f64) -> Result<f64> {
    spec.check_point(center)?;
    if !(delta.is_finite() && delta > 0.0) {
        return Err(HlsError::Domain(format!("chart radius must be > 0, got {delta}")));
    }
    let inj = spec.injectivity_radius();
    if delta >= inj {
        return Err(HlsError::Domain(format!(
            "chart radius {delta} is not below the injectivity radius {inj} of {spec}"
        )));
    }
    Ok(match spec.kind() {
        ManifoldKind::Sphere2 => {
            let s = delta / spec.radius().unwrap();
            let ratio = s.sin() / s;
            1.0 - ratio * ratio
        }
        _ => 0.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct NormalChart {
    spec: ManifoldSpec,
    center: Point,
    radius: f64,
    distortion: f64,
    /// Orthonormal tangent frame at the centre (sphere only).
    frame: [Point; 2],
}

impl NormalChart {
    pub fn new(spec: &ManifoldSpec, center: Point, radius: f64) -> Result<Self> {
        let distortion = metric_distortion(spec, &center, radius)?;
        let center = spec.canonicalize(&center);
        let frame = if spec.kind() == ManifoldKind::Sphere2 {
            tangent_frame(&center)
        } else {
            [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
        };
        Ok(Self { spec: *spec, center, radius, distortion, frame })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn center(&self) -> &Point {
        &self.center
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    /// Maps tangent coordinates `u` (first `n` entries used) to the manifold.
    pub fn exp_map(&self, u: &[f64]) -> Result<Point> {
        let n = self.spec.dimension();
        if u.len() < n || u[n..].iter().any(|&c| c != 0.0) {
            return Err(HlsError::Usage(format!("expected {n} tangent coordinates, got {u:?}")));
        }
        let len = u[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
        if len > self.radius * (1.0 + 1e-12) {
            return Err(HlsError::Domain(format!(
                "tangent vector of length {len} exceeds chart radius {}",
                self.radius
            )));
        }
        Ok(self.exp_unchecked(&u[..n], len))
    }

    fn exp_unchecked(&self, u: &[f64], len: f64) -> Point {
        let c = &self.center;
        match self.spec.kind() {
            ManifoldKind::Sphere2 => {
                if len == 0.0 {
                    return *c;
                }
                let r = self.spec.radius().unwrap();
                let s = len / r;
                let [e1, e2] = &self.frame;
                let dir = [
                    (u[0] * e1[0] + u[1] * e2[0]) / len,
                    (u[0] * e1[1] + u[1] * e2[1]) / len,
                    (u[0] * e1[2] + u[1] * e2[2]) / len,
                ];
                let (sin, cos) = s.sin_cos();
                let p = [cos * c[0] + r * sin * dir[0], cos * c[1] + r * sin * dir[1], cos * c[2] + r * sin * dir[2]];
                self.spec.canonicalize(&p)
            }
            ManifoldKind::Circle => {
                let r = self.spec.radius().unwrap();
                self.spec.canonicalize(&[c[0] + u[0] / r, 0.0, 0.0])
            }
            ManifoldKind::Torus1 | ManifoldKind::Torus2 => {
                let mut p = *c;
                for (pi, ui) in p.iter_mut().zip(u) {
                    *pi += ui;
                }
                self.spec.canonicalize(&p)
            }
            _ => {
                let mut p = *c;
                for (pi, ui) in p.iter_mut().zip(u) {
                    *pi += ui;
                }
                p
            }
        }
    }

    /// `√det g` at tangent coordinates `u`: `(sin s / s)^{n−1}` on the sphere
    /// (`s = |u|/R`), 1 on flat entries.
    pub fn volume_factor(&self, u: &[f64]) -> f64 {
        match self.spec.kind() {
            ManifoldKind::Sphere2 => {
                let n = self.spec.dimension();
                let len = u[..n].iter().map(|c| c * c).sum::<f64>().sqrt();
                let s = len / self.spec.radius().unwrap();
                if s < 1e-8 {
                    1.0 - s * s / 6.0
                } else {
                    s.sin() / s
                }
            }
            _ => 1.0,
        }
    }
}

fn tangent_frame(p: &Point) -> [Point; 2] {
    let r = norm3(p);
    let unit = [p[0] / r, p[1] / r, p[2] / r];
    // Least-aligned coordinate axis keeps the projection well conditioned.
    let axis = (0..3).min_by(|&a, &b| unit[a].abs().partial_cmp(&unit[b].abs()).unwrap()).unwrap();
    let mut a = [0.0; 3];
    a[axis] = 1.0;
    let dot = a[0] * unit[0] + a[1] * unit[1] + a[2] * unit[2];
    let mut e1 = [a[0] - dot * unit[0], a[1] - dot * unit[1], a[2] - dot * unit[2]];
    let n1 = norm3(&e1);
    e1.iter_mut().for_each(|c| *c /= n1);
    let e2 = [unit[1] * e1[2] - unit[2] * e1[1], unit[2] * e1[0] - unit[0] * e1[2], unit[0] * e1[1] - unit[1] * e1[0]];
    [e1, e2]
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn origin_maps_to_center() {
        let s = ManifoldSpec::sphere2(1.0).unwrap();
        let p = [0.6, 0.0, 0.8];
        let chart = NormalChart::new(&s, p, 0.5).unwrap();
        let x = chart.exp_map(&[0.0, 0.0]).unwrap();
        assert_relative_eq!(s.distance(&x, &p), 0.0, epsilon = 1e-15);
    }

    #[test]
    fn radial_geodesics_preserve_length_on_sphere() {
        let s = ManifoldSpec::sphere2(2.0).unwrap();
        let p = [0.0, 2.0, 0.0];
        let chart = NormalChart::new(&s, p, 3.0).unwrap();
        for (u0, u1) in [(0.3, 0.0), (0.0, -1.2), (1.5, 2.0), (-2.1, 1.0)] {
            let x = chart.exp_map(&[u0, u1]).unwrap();
            assert_relative_eq!(s.distance(&p, &x), f64::hypot(u0, u1), epsilon = 1e-12);
        }
    }

    #[test]
    fn torus_chart_is_isometric() {
        let t = ManifoldSpec::torus(&[1.0, 1.0]).unwrap();
        let chart = NormalChart::new(&t, [0.9, 0.1, 0.0], 0.3).unwrap();
        assert_eq!(chart.distortion(), 0.0);
        let a = chart.exp_map(&[0.2, -0.15]).unwrap();
        let b = chart.exp_map(&[-0.1, 0.2]).unwrap();
        assert_relative_eq!(t.distance(&a, &b), f64::hypot(0.3, 0.35), epsilon = 1e-14);
        assert_relative_eq!(a[0], 0.1, epsilon = 1e-14);
    }

    #[test]
    fn chart_radius_limits() {
        let s = ManifoldSpec::sphere2(1.0).unwrap();
        let chart = NormalChart::new(&s, [0.0, 0.0, 1.0], 0.5).unwrap();
        assert!(matches!(chart.exp_map(&[0.4, 0.4]), Err(HlsError::Domain(_))));
        assert!(matches!(NormalChart::new(&s, [0.0, 0.0, 1.0], std::f64::consts::PI), Err(HlsError::Domain(_))));
        let t = ManifoldSpec::torus(&[1.0]).unwrap();
        assert!(metric_distortion(&t, &[0.0, 0.0, 0.0], 0.5).is_err());
    }

    #[test]
    fn sphere_distortion_shrinks_with_radius() {
        let s = ManifoldSpec::sphere2(1.0).unwrap();
        let p = [1.0, 0.0, 0.0];
        let eps: Vec<f64> =
            [1.0, 0.5, 0.25, 0.125, 0.01].iter().map(|&d| metric_distortion(&s, &p, d).unwrap()).collect();
        assert!(eps.windows(2).all(|w| w[1] < w[0]), "{eps:?}");
        assert!(eps[4] < 1e-4);
    }

    #[test]
    fn volume_factor_tracks_sin_ratio() {
        let s = ManifoldSpec::sphere2(1.0).unwrap();
        let chart = NormalChart::new(&s, [0.0, 0.0, 1.0], 1.0).unwrap();
        assert_relative_eq!(chart.volume_factor(&[0.6, 0.8]), 1f64.sin(), epsilon = 1e-15);
        assert_eq!(chart.volume_factor(&[0.0, 0.0]), 1.0);
    }
}
