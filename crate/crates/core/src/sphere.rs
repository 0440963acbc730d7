//! Points of the Riemann sphere, the chordal metric, charts and rotations.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

/// A point of the Riemann sphere: an affine complex value or the single
/// point at infinity. Serialized as `[re, im]`, or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum SpherePoint {
    Finite(C64),
    Infinity,
}

pub use SpherePoint::Infinity;

/// The two standard charts: `z` on `|z| <= 1` and `w = 1/z` elsewhere.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Chart {
    Affine,
    Inverse,
}

impl SpherePoint {
    /// Non-finite input collapses to [`Infinity`].
    pub fn new(z: C64) -> Self {
        if z.re.is_finite() && z.im.is_finite() {
            SpherePoint::Finite(z)
        } else {
            Infinity
        }
    }

    pub fn real(x: f64) -> Self {
        Self::new(C64::new(x, 0.0))
    }

    pub fn from_polar(r: f64, turns: f64) -> Self {
        Self::new(C64::from_polar(r, std::f64::consts::TAU * turns))
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, Infinity)
    }

    pub fn finite(&self) -> Option<C64> {
        match *self {
            SpherePoint::Finite(z) => Some(z),
            Infinity => None,
        }
    }

    /// Squared modulus, `+inf` at infinity.
    pub fn norm_sqr(&self) -> f64 {
        match self {
            SpherePoint::Finite(z) => z.norm_sqr(),
            Infinity => f64::INFINITY,
        }
    }

    /// Preferred chart and the coordinate of the point in it. Crossover at `|z| = 1`.
    pub fn chart(&self) -> (Chart, C64) {
        match *self {
            SpherePoint::Finite(z) if z.norm_sqr() <= 1.0 => (Chart::Affine, z),
            SpherePoint::Finite(z) => (Chart::Inverse, z.inv()),
            Infinity => (Chart::Inverse, ZERO),
        }
    }

    /// Coordinate in a given chart; `None` at the chart's pole.
    pub fn coord_in(&self, chart: Chart) -> Option<C64> {
        match (chart, *self) {
            (Chart::Affine, SpherePoint::Finite(z)) => Some(z),
            (Chart::Affine, Infinity) => None,
            (Chart::Inverse, Infinity) => Some(ZERO),
            (Chart::Inverse, SpherePoint::Finite(z)) => {
                if z == ZERO {
                    None
                } else {
                    Some(z.inv())
                }
            }
        }
    }

    pub fn from_chart(chart: Chart, u: C64) -> Self {
        match chart {
            Chart::Affine => SpherePoint::new(u),
            Chart::Inverse => {
                if u == ZERO {
                    Infinity
                } else {
                    SpherePoint::new(u.inv())
                }
            }
        }
    }

    /// Homogeneous coordinates `[x : y]` with `max(|x|,|y|) = 1` when built from a chart.
    pub fn homogeneous(&self) -> (C64, C64) {
        match self.chart() {
            (Chart::Affine, z) => (z, ONE),
            (Chart::Inverse, w) => (ONE, w),
        }
    }

    pub fn from_homogeneous(x: C64, y: C64) -> Self {
        if x.norm_sqr() <= y.norm_sqr() {
            SpherePoint::new(x / y)
        } else {
            Self::from_chart(Chart::Inverse, y / x)
        }
    }

    /// Inverse stereographic projection onto the unit sphere in R^3; infinity
    /// is the north pole. Euclidean distance there equals [`spherical_distance`].
    pub fn to_r3(&self) -> [f64; 3] {
        match self.chart() {
            (Chart::Affine, z) => {
                let m = z.norm_sqr();
                let s = 1.0 / (1.0 + m);
                [2.0 * z.re * s, 2.0 * z.im * s, (m - 1.0) * s]
            }
            (Chart::Inverse, w) => {
                // z = 1/w: (2 conj(w), 1 - |w|^2) / (1 + |w|^2)
                let m = w.norm_sqr();
                let s = 1.0 / (1.0 + m);
                [2.0 * w.re * s, -2.0 * w.im * s, (1.0 - m) * s]
            }
        }
    }

    pub fn from_r3(p: [f64; 3]) -> Self {
        let n = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
        let (x, y, h) = (p[0] / n, p[1] / n, p[2] / n);
        if h <= 0.0 {
            SpherePoint::new(C64::new(x, y) / (1.0 - h))
        } else {
            // w = 1/z = (x - iy) / (1 + h)
            Self::from_chart(Chart::Inverse, C64::new(x, -y) / (1.0 + h))
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum PointRepr {
    Finite([f64; 2]),
    Named(String),
}

impl Serialize for SpherePoint {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            SpherePoint::Finite(z) => PointRepr::Finite([z.re, z.im]),
            Infinity => PointRepr::Named("inf".into()),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpherePoint {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match PointRepr::deserialize(d)? {
            PointRepr::Finite([re, im]) => Ok(SpherePoint::new(C64::new(re, im))),
            PointRepr::Named(s) if s == "inf" => Ok(Infinity),
            PointRepr::Named(s) => Err(serde::de::Error::custom(format!("bad point {s:?}"))),
        }
    }
}

impl From<C64> for SpherePoint {
    fn from(z: C64) -> Self {
        SpherePoint::new(z)
    }
}

impl fmt::Display for SpherePoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpherePoint::Finite(z) => write!(f, "{:?}{:+?}i", z.re, z.im),
            Infinity => write!(f, "inf"),
        }
    }
}

/// Chordal distance on the sphere of diameter 2:
/// `2|p-q| / sqrt((1+|p|^2)(1+|q|^2))`.
pub fn spherical_distance(p: SpherePoint, q: SpherePoint) -> f64 {
    match (p, q) {
        (Infinity, Infinity) => 0.0,
        (Infinity, SpherePoint::Finite(z)) | (SpherePoint::Finite(z), Infinity) => {
            dist_to_infinity(z)
        }
        (SpherePoint::Finite(a), SpherePoint::Finite(b)) => {
            let (na, nb) = (a.norm_sqr(), b.norm_sqr());
            if na <= 1.0 && nb <= 1.0 {
                2.0 * (a - b).norm() / ((1.0 + na) * (1.0 + nb)).sqrt()
            } else if na > 1.0 && nb > 1.0 {
                // z -> 1/z is an isometry
                let (ia, ib) = (a.inv(), b.inv());
                2.0 * (ia - ib).norm() / ((1.0 + ia.norm_sqr()) * (1.0 + ib.norm_sqr())).sqrt()
            } else {
                let (big, small) = if na > 1.0 { (a, b) } else { (b, a) };
                let inv = big.inv();
                2.0 * (ONE - small * inv).norm()
                    / ((1.0 + inv.norm_sqr()) * (1.0 + small.norm_sqr())).sqrt()
            }
        }
    }
}

fn dist_to_infinity(z: C64) -> f64 {
    let m = z.norm_sqr();
    if m <= 1.0 {
        2.0 / (1.0 + m).sqrt()
    } else {
        let w = z.inv();
        2.0 * w.norm() / (1.0 + w.norm_sqr()).sqrt()
    }
}

/// An isometry of the chordal metric: `z -> (a z + b) / (-conj(b) z + conj(a))`
/// with `|a|^2 + |b|^2 = 1`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rotation {
    a: C64,
    b: C64,
}

impl Rotation {
    pub fn identity() -> Self {
        Rotation { a: ONE, b: ZERO }
    }

    fn normalized(a: C64, b: C64) -> Self {
        let n = (a.norm_sqr() + b.norm_sqr()).sqrt();
        Rotation { a: a / n, b: b / n }
    }

    /// Rotation carrying `c` to `0`.
    pub fn to_origin(c: SpherePoint) -> Self {
        match c {
            // z -> (z - c) / (conj(c) z + 1)
            SpherePoint::Finite(c) => Self::normalized(ONE, -c),
            // z -> -1/z
            Infinity => Rotation { a: ZERO, b: ONE },
        }
    }

    /// Rotation carrying `c` to infinity.
    pub fn to_infinity(c: SpherePoint) -> Self {
        // compose with z -> -1/z, which swaps 0 and infinity
        Rotation { a: ZERO, b: ONE }.compose(&Self::to_origin(c))
    }

    /// `self ∘ other`.
    pub fn compose(&self, other: &Rotation) -> Rotation {
        // the first row determines an SU(2) matrix
        let [[a1, b1], _] = self.matrix();
        let [[a2, b2], [c2, d2]] = other.matrix();
        Self::normalized(a1 * a2 + b1 * c2, a1 * b2 + b1 * d2)
    }

    pub fn inverse(&self) -> Rotation {
        Rotation { a: self.a.conj(), b: -self.b }
    }

    /// Matrix `[[a, b], [-conj(b), conj(a)]]` acting on homogeneous coordinates.
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        [[self.a, self.b], [-self.b.conj(), self.a.conj()]]
    }

    pub fn apply_homogeneous(&self, x: C64, y: C64) -> (C64, C64) {
        let [[a, b], [c, d]] = self.matrix();
        (a * x + b * y, c * x + d * y)
    }

    pub fn apply(&self, p: SpherePoint) -> SpherePoint {
        let (x, y) = p.homogeneous();
        let (u, v) = self.apply_homogeneous(x, y);
        SpherePoint::from_homogeneous(u, v)
    }
}

/// Euclidean distance of two points in R^3.
pub fn r3_dist(a: [f64; 3], b: [f64; 3]) -> f64 {
    ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2)).sqrt()
}

/// Midpoint on the sphere (normalized chord midpoint).
pub fn spherical_midpoint(p: SpherePoint, q: SpherePoint) -> SpherePoint {
    let (a, b) = (p.to_r3(), q.to_r3());
    let m = [a[0] + b[0], a[1] + b[1], a[2] + b[2]];
    if m.iter().all(|x| x.abs() < 1e-300) {
        return p;
    }
    SpherePoint::from_r3(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> SpherePoint {
        SpherePoint::new(C64::new(re, im))
    }

    #[test]
    fn json_form() {
        assert_eq!(serde_json::to_string(&c(1.5, -2.0)).unwrap(), "[1.5,-2.0]");
        assert_eq!(serde_json::to_string(&Infinity).unwrap(), "\"inf\"");
        assert_eq!(serde_json::from_str::<SpherePoint>("\"inf\"").unwrap(), Infinity);
        assert_eq!(serde_json::from_str::<SpherePoint>("[0.0,1.0]").unwrap(), c(0.0, 1.0));
        assert!(serde_json::from_str::<SpherePoint>("\"nan\"").is_err());
    }

    #[test]
    fn distance_examples() {
        assert_eq!(spherical_distance(c(0.0, 0.0), c(0.0, 0.0)), 0.0);
        assert!((spherical_distance(c(0.0, 0.0), Infinity) - 2.0).abs() < 1e-15);
        assert!((spherical_distance(c(1.0, 0.0), c(-1.0, 0.0)) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn distance_matches_r3_embedding() {
        let pts = [c(0.3, -0.2), c(5.0, 2.0), c(-40.0, 1e3), Infinity, c(0.9, 0.5)];
        for &p in &pts {
            for &q in &pts {
                let d = spherical_distance(p, q);
                let e = r3_dist(p.to_r3(), q.to_r3());
                assert!((d - e).abs() < 1e-13, "{p} {q}: {d} vs {e}");
                assert!((d - spherical_distance(q, p)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn r3_round_trip() {
        for p in [c(0.3, -0.2), c(5.0, 2.0), c(0.0, 0.0), Infinity] {
            let q = SpherePoint::from_r3(p.to_r3());
            assert!(spherical_distance(p, q) < 1e-14);
        }
    }

    #[test]
    fn rotations_are_isometries() {
        let rots = [
            Rotation::to_origin(c(0.4, 0.7)),
            Rotation::to_infinity(c(-2.0, 0.5)),
            Rotation::to_infinity(Infinity),
            Rotation::to_origin(Infinity),
        ];
        let pts = [c(0.1, 0.2), c(3.0, -1.0), Infinity, c(-0.5, 0.0)];
        for r in &rots {
            for &p in &pts {
                let back = r.inverse().apply(r.apply(p));
                assert!(spherical_distance(p, back) < 1e-13);
                for &q in &pts {
                    let d0 = spherical_distance(p, q);
                    let d1 = spherical_distance(r.apply(p), r.apply(q));
                    assert!((d0 - d1).abs() < 1e-13);
                }
            }
        }
        let far = Rotation::to_infinity(c(-2.0, 0.5)).apply(c(-2.0, 0.5));
        assert!(spherical_distance(far, Infinity) < 1e-15);
        let o = Rotation::to_origin(c(0.4, 0.7)).apply(c(0.4, 0.7));
        assert!(spherical_distance(o, c(0.0, 0.0)) < 1e-15);
    }
}
