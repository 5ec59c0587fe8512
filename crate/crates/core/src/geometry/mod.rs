//! Points, directions and the spherical parametrization of a surface seen
//! from a reference point.
//!
//! Directions use the polar-from-+z convention everywhere in the crate:
//! `u(phi, theta) = (sin phi cos theta, sin phi sin theta, cos phi)` with
//! `phi` in `[0, pi]` and `theta` in `[0, 2 pi)`.

mod mesh;
pub mod shapes;

use std::f64::consts::{PI, TAU};
use std::ops::{Add, Div, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use mesh::{sample_surface, Bvh, Hit, TriangleMesh, RAY_EPSILON};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const ORIGIN: Point3 = Point3::new(0.0, 0.0, 0.0);

    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Point3 { x, y, z }
    }

    pub fn dot(self, other: Point3) -> f64 {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Point3) -> Point3 {
        Point3::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm_squared(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_squared().sqrt()
    }

    pub fn distance_squared(self, other: Point3) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        dx * dx + dy * dy + dz * dz
    }

    pub fn distance(self, other: Point3) -> f64 {
        self.distance_squared(other).sqrt()
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.z]
    }

    pub fn component(self, axis: usize) -> f64 {
        match axis {
            0 => self.x,
            1 => self.y,
            _ => self.z,
        }
    }

    pub fn min(self, other: Point3) -> Point3 {
        Point3::new(
            self.x.min(other.x),
            self.y.min(other.y),
            self.z.min(other.z),
        )
    }

    pub fn max(self, other: Point3) -> Point3 {
        Point3::new(
            self.x.max(other.x),
            self.y.max(other.y),
            self.z.max(other.z),
        )
    }

    /// Lexicographic total order on (x, y, z).
    pub fn total_cmp(&self, other: &Point3) -> std::cmp::Ordering {
        self.x
            .total_cmp(&other.x)
            .then(self.y.total_cmp(&other.y))
            .then(self.z.total_cmp(&other.z))
    }
}

impl From<[f64; 3]> for Point3 {
    fn from(v: [f64; 3]) -> Self {
        Point3::new(v[0], v[1], v[2])
    }
}

impl Add for Point3 {
    type Output = Point3;
    fn add(self, o: Point3) -> Point3 {
        Point3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl Sub for Point3 {
    type Output = Point3;
    fn sub(self, o: Point3) -> Point3 {
        Point3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl Mul<f64> for Point3 {
    type Output = Point3;
    fn mul(self, s: f64) -> Point3 {
        Point3::new(self.x * s, self.y * s, self.z * s)
    }
}

impl Div<f64> for Point3 {
    type Output = Point3;
    fn div(self, s: f64) -> Point3 {
        Point3::new(self.x / s, self.y / s, self.z / s)
    }
}

impl Neg for Point3 {
    type Output = Point3;
    fn neg(self) -> Point3 {
        Point3::new(-self.x, -self.y, -self.z)
    }
}

/// Direction parameters `(phi, theta)`: polar angle from +z and azimuth from +x.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphericalDirection {
    pub phi: f64,
    pub theta: f64,
}

impl SphericalDirection {
    pub const fn new(phi: f64, theta: f64) -> Self {
        SphericalDirection { phi, theta }
    }

    /// Wraps `theta` into `[0, 2 pi)`, clamps `phi` into `[0, pi]` and zeroes
    /// the azimuth at the poles.
    pub fn canonical(self) -> Self {
        let phi = self.phi.clamp(0.0, PI);
        if phi == 0.0 || phi == PI {
            return SphericalDirection { phi, theta: 0.0 };
        }
        let mut theta = self.theta.rem_euclid(TAU);
        if theta >= TAU {
            theta = 0.0;
        }
        SphericalDirection { phi, theta }
    }

    pub fn bearing(self) -> UnitVector {
        let (sp, cp) = self.phi.sin_cos();
        let (st, ct) = self.theta.sin_cos();
        UnitVector {
            x: sp * ct,
            y: sp * st,
            z: cp,
        }
    }
}

/// A bearing vector of unit length.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector {
    /// Normalizes `v`; returns `None` for the zero vector or non-finite input.
    pub fn new(v: Point3) -> Option<Self> {
        let n = v.norm();
        if !(n > 0.0) || !n.is_finite() {
            return None;
        }
        Some(UnitVector {
            x: v.x / n,
            y: v.y / n,
            z: v.z / n,
        })
    }

    pub fn x(self) -> f64 {
        self.x
    }

    pub fn y(self) -> f64 {
        self.y
    }

    pub fn z(self) -> f64 {
        self.z
    }

    pub fn as_point(self) -> Point3 {
        Point3::new(self.x, self.y, self.z)
    }

    pub fn direction(self) -> SphericalDirection {
        spherical_of(self.as_point())
    }
}

/// One training observation: the distance to the surface along a direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionalSample {
    pub direction: SphericalDirection,
    pub distance: f64,
}

fn spherical_of(r: Point3) -> SphericalDirection {
    let rho = r.x.hypot(r.y);
    let phi = rho.atan2(r.z);
    if rho == 0.0 {
        return SphericalDirection { phi, theta: 0.0 };
    }
    let mut theta = r.y.atan2(r.x);
    if theta < 0.0 {
        theta += TAU;
    }
    if theta >= TAU {
        theta = 0.0;
    }
    SphericalDirection { phi, theta }
}

/// Expresses `p` relative to the reference point `c` as a direction and a distance.
pub fn to_spherical(p: Point3, c: Point3) -> Result<DirectionalSample> {
    let r = p - c;
    let d = r.norm();
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::DegenerateDirection);
    }
    Ok(DirectionalSample {
        direction: spherical_of(r),
        distance: d,
    })
}

/// `c + d * u(s)`.
pub fn from_spherical(s: SphericalDirection, d: f64, c: Point3) -> Point3 {
    c + s.bearing().as_point() * d
}

/// Affine map between model coordinates and the unit-sphere frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Normalization {
    pub center: Point3,
    pub scale: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        center: Point3::ORIGIN,
        scale: 1.0,
    };

    pub fn apply(&self, p: Point3) -> Point3 {
        (p - self.center) / self.scale
    }

    pub fn invert(&self, p: Point3) -> Point3 {
        p * self.scale + self.center
    }
}

/// Centers the bounding box at the origin and scales the farthest point to norm 1.
pub fn normalize_to_unit_sphere(points: &[Point3]) -> Result<(Vec<Point3>, Normalization)> {
    let norm = unit_sphere_normalization(points)?;
    Ok((points.iter().map(|&p| norm.apply(p)).collect(), norm))
}

pub fn unit_sphere_normalization(points: &[Point3]) -> Result<Normalization> {
    let first = *points.first().ok_or(Error::EmptyInput("point list"))?;
    if points.iter().any(|p| !p.is_finite()) {
        return Err(Error::InvalidArgument("non-finite coordinate".into()));
    }
    let (lo, hi) = points
        .iter()
        .fold((first, first), |(lo, hi), &p| (lo.min(p), hi.max(p)));
    let center = (lo + hi) * 0.5;
    let scale = points
        .iter()
        .map(|&p| p.distance(center))
        .fold(0.0_f64, f64::max);
    if scale == 0.0 {
        return Err(Error::DegenerateScale);
    }
    Ok(Normalization { center, scale })
}

/// The golden-angle spiral lattice with `n` points on the unit sphere.
pub fn fibonacci_sphere(n: usize) -> Result<Vec<UnitVector>> {
    if n == 0 {
        return Err(Error::InvalidArgument("fibonacci_sphere needs n >= 1".into()));
    }
    let golden = (1.0 + 5.0_f64.sqrt()) / 2.0;
    let step = TAU * (1.0 - 1.0 / golden);
    let nf = n as f64;
    Ok((0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / nf;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let az = (step * i as f64).rem_euclid(TAU);
            let (s, c) = az.sin_cos();
            UnitVector {
                x: r * c,
                y: r * s,
                z,
            }
        })
        .collect())
}
