use std::ops::{Add, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use super::{ModelError, PhysicsConstants};
use crate::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Deserialize)]
#[serde(from = "[T; 3]")]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> Vec3<T> {
    pub fn new(x: T, y: T, z: T) -> Self {
        Self { x, y, z }
    }

    pub fn dot(self, other: Self) -> T {
        self.x * other.x + self.y * other.y + self.z * other.z
    }

    pub fn cross(self, other: Self) -> Self {
        Self::new(
            self.y * other.z - self.z * other.y,
            self.z * other.x - self.x * other.z,
            self.x * other.y - self.y * other.x,
        )
    }

    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn normalized(self) -> Self {
        self * self.norm().recip()
    }
}

impl<T> From<[T; 3]> for Vec3<T> {
    fn from([x, y, z]: [T; 3]) -> Self {
        Self { x, y, z }
    }
}

impl<T: Serialize> Serialize for Vec3<T> {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [&self.x, &self.y, &self.z].serialize(serializer)
    }
}

impl<T> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    fn sub(self, o: Self) -> Self {
        Self::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    fn mul(self, s: T) -> Self {
        Self::new(self.x * s, self.y * s, self.z * s)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Self::new(-self.x, -self.y, -self.z)
    }
}

/// Copper conductor, an axis-aligned box occupying
/// `[0, length] × [-width/2, width/2] × [0, thickness]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StripGeometry<T> {
    pub length_cm: T,
    pub width_cm: T,
    pub thickness_cm: T,
}

impl<T: Real> StripGeometry<T> {
    pub fn lower_corner(&self) -> Vec3<T> {
        Vec3::new(T::zero(), -self.width_cm / T::lit(2.0), T::zero())
    }

    pub fn upper_corner(&self) -> Vec3<T> {
        Vec3::new(self.length_cm, self.width_cm / T::lit(2.0), self.thickness_cm)
    }
}

/// Rectangular sensitive area of one SDD.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorPlane<T> {
    pub center_cm: Vec3<T>,
    /// Unit normal of the sensitive surface.
    pub normal: Vec3<T>,
    /// In-plane direction of the `width_cm` side; orthogonal to `normal`.
    pub width_axis: Vec3<T>,
    pub width_cm: T,
    pub height_cm: T,
}

impl<T: Real> DetectorPlane<T> {
    pub fn area_cm2(&self) -> T {
        self.width_cm * self.height_cm
    }

    fn height_axis(&self) -> Vec3<T> {
        self.normal.cross(self.width_axis)
    }

    /// In-plane coordinates of a point lying in the detector plane.
    fn local(&self, p: Vec3<T>) -> (T, T) {
        let q = p - self.center_cm;
        (q.dot(self.width_axis), q.dot(self.height_axis()))
    }

    fn contains_local(&self, (u, v): (T, T)) -> bool {
        let two = T::lit(2.0);
        u.abs() <= self.width_cm / two && v.abs() <= self.height_cm / two
    }

    /// Distance along the ray to the sensitive rectangle and the cosine of the
    /// incidence angle, or `None` when the ray misses.
    pub fn intersect(&self, origin: Vec3<T>, direction: Vec3<T>) -> Option<(T, T)> {
        if !(self.area_cm2() > T::zero()) {
            return None;
        }
        let denom = direction.dot(self.normal);
        if denom == T::zero() {
            return None;
        }
        let distance = (self.center_cm - origin).dot(self.normal) / denom;
        if !(distance > T::zero()) {
            return None;
        }
        let hit = origin + direction * distance;
        self.contains_local(self.local(hit)).then(|| (distance, denom.abs()))
    }

    fn corners(&self) -> [Vec3<T>; 4] {
        let two = T::lit(2.0);
        let u = self.width_axis * (self.width_cm / two);
        let v = self.height_axis() * (self.height_cm / two);
        let c = self.center_cm;
        [c - u - v, c + u - v, c + u + v, c - u + v]
    }

    /// True when the two rectangles share interior area or cross each other.
    /// Rectangles that merely touch along an edge do not overlap.
    pub fn overlaps(&self, other: &Self) -> bool {
        let eps = T::lit(1e-9);
        let gap = (self.center_cm - other.center_cm).norm();
        let reach = T::lit(0.5)
            * ((self.width_cm.powi(2) + self.height_cm.powi(2)).sqrt()
                + (other.width_cm.powi(2) + other.height_cm.powi(2)).sqrt());
        if gap > reach + eps {
            return false;
        }
        let parallel = self.normal.cross(other.normal).norm() < eps;
        if parallel {
            let offset = (other.center_cm - self.center_cm).dot(self.normal);
            return offset.abs() < eps && self.coplanar_overlap(other);
        }
        self.crossing_overlap(other)
    }

    fn coplanar_overlap(&self, other: &Self) -> bool {
        let eps = T::lit(1e-9);
        let a: Vec<(T, T)> = self.corners().iter().map(|&p| self.local(p)).collect();
        let b: Vec<(T, T)> = other.corners().iter().map(|&p| self.local(p)).collect();
        let axes = [
            (T::one(), T::zero()),
            (T::zero(), T::one()),
            (b[1].0 - b[0].0, b[1].1 - b[0].1),
            (b[3].0 - b[0].0, b[3].1 - b[0].1),
        ];
        axes.iter().all(|&(ax, ay)| {
            let project = |pts: &[(T, T)]| {
                pts.iter().fold((T::infinity(), T::neg_infinity()), |(lo, hi), &(x, y)| {
                    let s = x * ax + y * ay;
                    (lo.min(s), hi.max(s))
                })
            };
            let (alo, ahi) = project(&a);
            let (blo, bhi) = project(&b);
            let scale = (ax * ax + ay * ay).sqrt().max(T::one());
            ahi - blo > eps * scale && bhi - alo > eps * scale
        })
    }

    /// Parameter interval along `origin + t·direction` inside the rectangle,
    /// for a line lying in this detector's plane.
    fn clip_line(&self, origin: Vec3<T>, direction: Vec3<T>) -> Option<(T, T)> {
        let (u0, v0) = self.local(origin);
        let du = direction.dot(self.width_axis);
        let dv = direction.dot(self.height_axis());
        let two = T::lit(2.0);
        let (mut lo, mut hi) = (T::neg_infinity(), T::infinity());
        for (start, slope, half) in [(u0, du, self.width_cm / two), (v0, dv, self.height_cm / two)] {
            if slope == T::zero() {
                if start.abs() > half {
                    return None;
                }
            } else {
                let (a, b) = ((-half - start) / slope, (half - start) / slope);
                lo = lo.max(a.min(b));
                hi = hi.min(a.max(b));
            }
        }
        (lo <= hi).then_some((lo, hi))
    }

    /// Non-parallel rectangles overlap when their clipped pieces of the
    /// planes' intersection line share a segment of positive length.
    fn crossing_overlap(&self, other: &Self) -> bool {
        let (n1, n2) = (self.normal, other.normal);
        let line = n1.cross(n2);
        let (d1, d2) = (n1.dot(self.center_cm), n2.dot(other.center_cm));
        let n12 = n1.dot(n2);
        let denom = line.dot(line);
        let origin = (n1 * (d1 * n2.dot(n2) - d2 * n12) + n2 * (d2 * n1.dot(n1) - d1 * n12)) * denom.recip();
        let direction = line.normalized();
        match (self.clip_line(origin, direction), other.clip_line(origin, direction)) {
            (Some((a0, a1)), Some((b0, b1))) => a1.min(b1) - a0.max(b0) > T::lit(1e-9),
            _ => false,
        }
    }
}

/// Strip plus detector layout for the detection-efficiency Monte Carlo.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometryConfig<T> {
    pub strip: StripGeometry<T>,
    #[serde(default)]
    pub detectors: Vec<DetectorPlane<T>>,
}

impl<T: Real> GeometryConfig<T> {
    pub fn detector_count(&self) -> usize {
        self.detectors.len()
    }

    /// Load-time checks: positive strip dimensions, at least one detector,
    /// positive areas, orthonormal detector frames, no overlapping detectors.
    pub fn validate(&self) -> Result<(), ModelError> {
        let cfg = |msg: String| ModelError::Config(msg);
        let s = &self.strip;
        if !(s.length_cm > T::zero() && s.width_cm > T::zero() && s.thickness_cm >= T::zero()) {
            return Err(cfg("strip dimensions must be positive".into()));
        }
        if self.detectors.is_empty() {
            return Err(cfg("geometry needs at least one detector".into()));
        }
        let tol = T::lit(1e-6);
        for (i, d) in self.detectors.iter().enumerate() {
            if !(d.width_cm > T::zero() && d.height_cm > T::zero()) {
                return Err(cfg(format!("detector {i}: sensitive area must be positive")));
            }
            if (d.normal.norm() - T::one()).abs() > tol || (d.width_axis.norm() - T::one()).abs() > tol {
                return Err(cfg(format!("detector {i}: normal and width_axis must be unit vectors")));
            }
            if d.normal.dot(d.width_axis).abs() > tol {
                return Err(cfg(format!("detector {i}: width_axis not orthogonal to normal")));
            }
        }
        for i in 0..self.detectors.len() {
            for j in i + 1..self.detectors.len() {
                if self.detectors[i].overlaps(&self.detectors[j]) {
                    return Err(cfg(format!("detectors {i} and {j} overlap")));
                }
            }
        }
        Ok(())
    }

    /// The strip here and the conductor length in the rate model describe the
    /// same object.
    pub fn check_consistent(&self, consts: &PhysicsConstants<T>) -> Result<(), ModelError> {
        let (a, b) = (self.strip.length_cm, consts.strip_length_cm);
        if (a - b).abs() > T::lit(1e-9) * b.abs().max(T::one()) {
            return Err(ModelError::Config(format!(
                "geometry strip length {a} cm differs from strip_length_cm {b} cm"
            )));
        }
        Ok(())
    }

    /// Six 0.8 × 0.8 cm² SDDs, three facing each side of a 10 cm × 2 cm ×
    /// 50 µm strip at 1.5 cm. A stand-in layout chosen to give a detection
    /// efficiency near 1 %, not a survey of any real apparatus.
    pub fn default_layout() -> Self {
        let l = T::lit;
        let strip = StripGeometry {
            length_cm: l(10.0),
            width_cm: l(2.0),
            thickness_cm: l(0.005),
        };
        let mut detectors = Vec::with_capacity(6);
        for (z, nz) in [(l(0.005 + 1.5), -T::one()), (l(-1.5), T::one())] {
            for x in [3.5, 5.0, 6.5] {
                detectors.push(DetectorPlane {
                    center_cm: Vec3::new(l(x), T::zero(), z),
                    normal: Vec3::new(T::zero(), T::zero(), nz),
                    width_axis: Vec3::new(T::one(), T::zero(), T::zero()),
                    width_cm: l(0.8),
                    height_cm: l(0.8),
                });
            }
        }
        Self { strip, detectors }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plane(center: [f64; 3], normal: [f64; 3], axis: [f64; 3], w: f64, h: f64) -> DetectorPlane<f64> {
        DetectorPlane {
            center_cm: center.into(),
            normal: normal.into(),
            width_axis: axis.into(),
            width_cm: w,
            height_cm: h,
        }
    }

    #[test]
    fn default_layout_valid() {
        let g = GeometryConfig::<f64>::default_layout();
        g.validate().unwrap();
        assert_eq!(g.detector_count(), 6);
        g.check_consistent(&PhysicsConstants::default()).unwrap();
    }

    #[test]
    fn strip_length_mismatch_detected() {
        let mut g = GeometryConfig::<f64>::default_layout();
        g.strip.length_cm = 7.0;
        assert!(g.check_consistent(&PhysicsConstants::default()).is_err());
    }

    #[test]
    fn coplanar_overlap() {
        let a = plane([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, 1.0);
        let b = plane([0.5, 0.5, 1.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, 1.0);
        let touching = plane([1.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], 1.0, 1.0);
        let rotated = plane([0.0, 0.0, 1.0], [0.0, 0.0, 1.0], [0.6, 0.8, 0.0], 0.2, 0.2);
        assert!(a.overlaps(&b));
        assert!(!a.overlaps(&touching));
        assert!(a.overlaps(&rotated));
    }

    #[test]
    fn crossing_and_separate_planes() {
        let a = plane([0.0, 0.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, 1.0);
        let crossing = plane([0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 1.0);
        let above = plane([0.0, 0.0, 0.2], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0], 1.0, 1.0);
        let beside = plane([2.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 1.0, 1.0);
        assert!(a.overlaps(&crossing));
        assert!(!a.overlaps(&above));
        assert!(!a.overlaps(&beside));
    }

    #[test]
    fn overlapping_layout_rejected() {
        let mut g = GeometryConfig::<f64>::default_layout();
        g.detectors[1].center_cm.x = 3.9;
        assert!(matches!(g.validate(), Err(ModelError::Config(_))));
    }

    #[test]
    fn degenerate_layouts_rejected() {
        let mut g = GeometryConfig::<f64>::default_layout();
        g.detectors[0].width_cm = 0.0;
        assert!(g.validate().is_err());
        g.detectors.clear();
        assert!(g.validate().is_err());
    }

    #[test]
    fn ray_intersection() {
        let d = plane([0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], 1.0, 1.0);
        let origin = Vec3::new(0.0, 0.0, 0.0);
        let (dist, cos) = d.intersect(origin, Vec3::new(0.0, 0.0, 1.0)).unwrap();
        assert!((dist - 1.0).abs() < 1e-12 && (cos - 1.0).abs() < 1e-12);
        assert!(d.intersect(origin, Vec3::new(0.0, 0.0, -1.0)).is_none());
        assert!(d.intersect(origin, Vec3::new(1.0, 0.0, 0.2).normalized()).is_none());
        let zero = plane([0.0, 0.0, 1.0], [0.0, 0.0, -1.0], [1.0, 0.0, 0.0], 0.0, 1.0);
        assert!(zero.intersect(origin, Vec3::new(0.0, 0.0, 1.0)).is_none());
    }
}
