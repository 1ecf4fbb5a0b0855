//! Catalog of compact model manifolds and their intrinsic distances.
//!
//! Points are stored as `[f64; 3]` in each manifold's canonical coordinates:
//!
//! | kind        | coordinates used                     |
//! |-------------|--------------------------------------|
//! | `circle`    | `[angle, _, _]`                      |
//! | `sphere2`   | ambient `[x, y, z]` with norm = radius |
//! | `torus1/2`  | `[x1, x2?, _]`, taken modulo periods |
//! | `ball1/2/3` | Cartesian `[x1, x2?, x3?]`           |
//!
//! Unused trailing coordinates are zero.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use crate::error::{HlsError, Result};

pub type Point = [f64; 3];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    Circle,
    Sphere2,
    Torus1,
    Torus2,
    Ball1,
    Ball2,
    Ball3,
}

impl ManifoldKind {
    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Circle => "circle",
            ManifoldKind::Sphere2 => "sphere2",
            ManifoldKind::Torus1 => "torus1",
            ManifoldKind::Torus2 => "torus2",
            ManifoldKind::Ball1 => "ball1",
            ManifoldKind::Ball2 => "ball2",
            ManifoldKind::Ball3 => "ball3",
        }
    }

    pub fn dimension(self) -> usize {
        match self {
            ManifoldKind::Circle | ManifoldKind::Torus1 | ManifoldKind::Ball1 => 1,
            ManifoldKind::Sphere2 | ManifoldKind::Torus2 | ManifoldKind::Ball2 => 2,
            ManifoldKind::Ball3 => 3,
        }
    }

    pub fn is_euclidean_ball(self) -> bool {
        matches!(self, ManifoldKind::Ball1 | ManifoldKind::Ball2 | ManifoldKind::Ball3)
    }

    pub fn is_flat(self) -> bool {
        !matches!(self, ManifoldKind::Sphere2)
    }
}

impl FromStr for ManifoldKind {
    type Err = HlsError;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.trim() {
            "circle" => ManifoldKind::Circle,
            "sphere2" | "sphere" => ManifoldKind::Sphere2,
            "torus1" | "torus-1" => ManifoldKind::Torus1,
            "torus2" | "torus-2" => ManifoldKind::Torus2,
            "ball1" | "euclidean-ball-1" => ManifoldKind::Ball1,
            "ball2" | "euclidean-ball-2" => ManifoldKind::Ball2,
            "ball3" | "euclidean-ball-3" => ManifoldKind::Ball3,
            other => {
                return Err(HlsError::Config(format!(
                    "unknown manifold kind '{other}' (expected circle, sphere2, torus1, torus2, ball1, ball2 or ball3)"
                )))
            }
        })
    }
}

impl fmt::Display for ManifoldKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// A catalog manifold with its scale parameters.
///
/// `scale` holds the radius for circles, spheres and balls, and the periods
/// (one per axis) for tori.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ManifoldSpec {
    kind: ManifoldKind,
    scale: [f64; 2],
}

fn check_positive(what: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(HlsError::Config(format!("{what} must be finite and > 0, got {v}")))
    }
}

impl ManifoldSpec {
    pub fn circle(radius: f64) -> Result<Self> {
        check_positive("circle radius", radius)?;
        Ok(Self { kind: ManifoldKind::Circle, scale: [radius, 0.0] })
    }

    pub fn sphere2(radius: f64) -> Result<Self> {
        check_positive("sphere radius", radius)?;
        Ok(Self { kind: ManifoldKind::Sphere2, scale: [radius, 0.0] })
    }

    pub fn torus(periods: &[f64]) -> Result<Self> {
        for &p in periods {
            check_positive("torus period", p)?;
        }
        match *periods {
            [l] => Ok(Self { kind: ManifoldKind::Torus1, scale: [l, 0.0] }),
            [l1, l2] => Ok(Self { kind: ManifoldKind::Torus2, scale: [l1, l2] }),
            _ => Err(HlsError::Config(format!("torus needs 1 or 2 periods, got {}", periods.len()))),
        }
    }

    pub fn ball(dim: usize, radius: f64) -> Result<Self> {
        check_positive("ball radius", radius)?;
        let kind = match dim {
            1 => ManifoldKind::Ball1,
            2 => ManifoldKind::Ball2,
            3 => ManifoldKind::Ball3,
            d => return Err(HlsError::Config(format!("euclidean ball dimension must be 1, 2 or 3, got {d}"))),
        };
        Ok(Self { kind, scale: [radius, 0.0] })
    }

    /// Builds a spec from a kind plus the scale list used in config files.
    pub fn from_kind(kind: ManifoldKind, scales: &[f64]) -> Result<Self> {
        let first = |what: &str| {
            scales.first().copied().ok_or_else(|| HlsError::Config(format!("{what} requires a scale parameter")))
        };
        match kind {
            ManifoldKind::Circle => Self::circle(first("circle")?),
            ManifoldKind::Sphere2 => Self::sphere2(first("sphere2")?),
            ManifoldKind::Torus1 => Self::torus(&scales[..1.min(scales.len())]),
            ManifoldKind::Torus2 => match scales.len() {
                1 => Self::torus(&[scales[0], scales[0]]),
                _ => Self::torus(&scales[..2.min(scales.len())]),
            },
            ManifoldKind::Ball1 => Self::ball(1, first("ball1")?),
            ManifoldKind::Ball2 => Self::ball(2, first("ball2")?),
            ManifoldKind::Ball3 => Self::ball(3, first("ball3")?),
        }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.kind.dimension()
    }

    /// Radius for circle, sphere and ball entries.
    pub fn radius(&self) -> Option<f64> {
        match self.kind {
            ManifoldKind::Torus1 | ManifoldKind::Torus2 => None,
            _ => Some(self.scale[0]),
        }
    }

    pub fn periods(&self) -> Option<&[f64]> {
        match self.kind {
            ManifoldKind::Torus1 => Some(&self.scale[..1]),
            ManifoldKind::Torus2 => Some(&self.scale[..2]),
            _ => None,
        }
    }

    /// Scale parameters as they appear in config files.
    pub fn scales(&self) -> &[f64] {
        match self.kind {
            ManifoldKind::Torus2 => &self.scale[..2],
            _ => &self.scale[..1],
        }
    }

    /// Number of stored coordinates per point.
    pub fn coord_len(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere2 => 3,
            k => k.dimension(),
        }
    }

    pub fn volume(&self) -> f64 {
        let r = self.scale[0];
        match self.kind {
            ManifoldKind::Circle => 2.0 * PI * r,
            ManifoldKind::Sphere2 => 4.0 * PI * r * r,
            ManifoldKind::Torus1 => r,
            ManifoldKind::Torus2 => self.scale[0] * self.scale[1],
            ManifoldKind::Ball1 | ManifoldKind::Ball2 | ManifoldKind::Ball3 => {
                let d = self.dimension();
                unit_ball_volume(d) * r.powi(d as i32)
            }
        }
    }

    pub fn diameter(&self) -> f64 {
        let r = self.scale[0];
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::Sphere2 => PI * r,
            ManifoldKind::Torus1 => 0.5 * r,
            ManifoldKind::Torus2 => 0.5 * self.scale[0].hypot(self.scale[1]),
            _ => 2.0 * r,
        }
    }

    /// π·radius for circle and sphere, half the smallest period for tori.
    /// Euclidean balls are flat charts of themselves and report infinity.
    pub fn injectivity_radius(&self) -> f64 {
        match self.kind {
            ManifoldKind::Circle | ManifoldKind::Sphere2 => PI * self.scale[0],
            ManifoldKind::Torus1 => 0.5 * self.scale[0],
            ManifoldKind::Torus2 => 0.5 * self.scale[0].min(self.scale[1]),
            _ => f64::INFINITY,
        }
    }

    /// Checks that `x` is a valid point in canonical coordinates.
    pub fn check_point(&self, x: &Point) -> Result<()> {
        if x.iter().any(|c| !c.is_finite()) {
            return Err(HlsError::Domain(format!("non-finite coordinates {x:?}")));
        }
        let used = self.coord_len();
        if x[used..].iter().any(|&c| c != 0.0) {
            return Err(HlsError::Domain(format!("{} points use {used} coordinates, got {x:?}", self.kind)));
        }
        match self.kind {
            ManifoldKind::Sphere2 => {
                let r = self.scale[0];
                let norm = norm3(x);
                if (norm - r).abs() > 1e-9 * r {
                    return Err(HlsError::Domain(format!("point {x:?} has norm {norm}, off the sphere of radius {r}")));
                }
            }
            ManifoldKind::Ball1 | ManifoldKind::Ball2 | ManifoldKind::Ball3 => {
                let r = self.scale[0];
                if norm3(x) > r * (1.0 + 1e-12) {
                    return Err(HlsError::Domain(format!("point {x:?} lies outside the ball of radius {r}")));
                }
            }
            _ => {}
        }
        Ok(())
    }

    /// Validated geodesic distance.
    pub fn geodesic_distance(&self, x: &Point, y: &Point) -> Result<f64> {
        self.check_point(x)?;
        self.check_point(y)?;
        Ok(self.distance(x, y))
    }

    /// Geodesic distance without validation; the hot path of kernel assembly.
    #[inline]
    pub fn distance(&self, x: &Point, y: &Point) -> f64 {
        match self.kind {
            ManifoldKind::Circle => {
                let r = self.scale[0];
                r * wrapped_gap(x[0] - y[0], 2.0 * PI)
            }
            ManifoldKind::Sphere2 => {
                let cross = [x[1] * y[2] - x[2] * y[1], x[2] * y[0] - x[0] * y[2], x[0] * y[1] - x[1] * y[0]];
                let dot = x[0] * y[0] + x[1] * y[1] + x[2] * y[2];
                self.scale[0] * norm3(&cross).atan2(dot)
            }
            ManifoldKind::Torus1 => wrapped_gap(x[0] - y[0], self.scale[0]),
            ManifoldKind::Torus2 => {
                let a = wrapped_gap(x[0] - y[0], self.scale[0]);
                let b = wrapped_gap(x[1] - y[1], self.scale[1]);
                a.hypot(b)
            }
            _ => {
                let d = [x[0] - y[0], x[1] - y[1], x[2] - y[2]];
                norm3(&d)
            }
        }
    }

    /// Canonical representative of a point (angles and torus coordinates
    /// reduced to `[0, period)`, sphere points projected to the radius).
    pub fn canonicalize(&self, x: &Point) -> Point {
        match self.kind {
            ManifoldKind::Circle => [x[0].rem_euclid(2.0 * PI), 0.0, 0.0],
            ManifoldKind::Torus1 => [x[0].rem_euclid(self.scale[0]), 0.0, 0.0],
            ManifoldKind::Torus2 => [x[0].rem_euclid(self.scale[0]), x[1].rem_euclid(self.scale[1]), 0.0],
            ManifoldKind::Sphere2 => {
                let s = self.scale[0] / norm3(x);
                [x[0] * s, x[1] * s, x[2] * s]
            }
            _ => *x,
        }
    }

    /// Area (length, volume) of the geodesic ball of radius `r`, closed form.
    pub fn ball_volume(&self, r: f64) -> f64 {
        let r = r.max(0.0);
        match self.kind {
            ManifoldKind::Circle => (2.0 * r).min(self.volume()),
            ManifoldKind::Sphere2 => {
                let big_r = self.scale[0];
                let s = (r / big_r).min(PI);
                2.0 * PI * big_r * big_r * (1.0 - s.cos())
            }
            ManifoldKind::Torus1 => (2.0 * r).min(self.scale[0]),
            ManifoldKind::Torus2 if r <= 0.5 * self.scale[0].min(self.scale[1]) => PI * r * r,
            ManifoldKind::Torus2 => torus2_disk_area(r, self.scale[0], self.scale[1]),
            _ => unit_ball_volume(self.dimension()) * r.powi(self.dimension() as i32),
        }
    }
}

/// Area of the set {|x| ≤ r} in the fundamental domain of a 2-torus, by
/// integrating the wrapped distance profile along one axis.
fn torus2_disk_area(r: f64, l1: f64, l2: f64) -> f64 {
    // |a| ≤ l1/2, |b| ≤ l2/2; measure of a² + b² ≤ r².
    let steps = 4096;
    let h = l1 / steps as f64;
    (0..steps)
        .map(|i| {
            let a = -0.5 * l1 + (i as f64 + 0.5) * h;
            let rem = r * r - a * a;
            if rem <= 0.0 {
                0.0
            } else {
                2.0 * rem.sqrt().min(0.5 * l2) * h
            }
        })
        .sum()
}

impl fmt::Display for ManifoldSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.kind {
            ManifoldKind::Torus1 | ManifoldKind::Torus2 => {
                write!(f, "{}(periods={:?})", self.kind, self.scales())
            }
            _ => write!(f, "{}(radius={})", self.kind, self.scale[0]),
        }
    }
}

/// Volume of the unit ball in R^n.
pub fn unit_ball_volume(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => PI,
        3 => 4.0 * PI / 3.0,
        _ => {
            // ω_n = π^{n/2} / Γ(n/2 + 1), via the two-step recurrence.
            let mut w = [1.0, 2.0];
            for k in 2..=n {
                let next = 2.0 * PI / k as f64 * w[0];
                w = [w[1], next];
            }
            w[1]
        }
    }
}

#[inline]
fn wrapped_gap(d: f64, period: f64) -> f64 {
    let m = d.rem_euclid(period);
    m.min(period - m)
}

#[inline]
pub(crate) fn norm3(x: &Point) -> f64 {
    (x[0] * x[0] + x[1] * x[1] + x[2] * x[2]).sqrt()
}
