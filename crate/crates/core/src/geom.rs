//! Small fixed-size geometry: 3-vectors, axis-aligned boxes and upright
//! rigid transforms (yaw about world Z plus translation).

use std::ops::{Add, AddAssign, Index, Mul, Neg, Sub};

use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[T; 3]", into = "[T; 3]")]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct Vec3<T> {
    pub x: T,
    pub y: T,
    pub z: T,
}

impl<T: Real> From<[T; 3]> for Vec3<T> {
    fn from(a: [T; 3]) -> Self {
        Vec3::new(a[0], a[1], a[2])
    }
}

impl<T: Real> From<Vec3<T>> for [T; 3] {
    fn from(v: Vec3<T>) -> Self {
        [v.x, v.y, v.z]
    }
}

impl<T: Real> Vec3<T> {
    #[inline]
    pub const fn new(x: T, y: T, z: T) -> Self {
        Vec3 { x, y, z }
    }

    pub fn zero() -> Self {
        Vec3::new(T::zero(), T::zero(), T::zero())
    }

    pub fn splat(v: T) -> Self {
        Vec3::new(v, v, v)
    }

    #[inline]
    pub fn dot(self, o: Self) -> T {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Self) -> Self {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    #[inline]
    pub fn norm(self) -> T {
        self.dot(self).sqrt()
    }

    pub fn horizontal_norm(self) -> T {
        self.x.hypot(self.y)
    }

    pub fn min(self, o: Self) -> Self {
        Vec3::new(self.x.min(o.x), self.y.min(o.y), self.z.min(o.z))
    }

    pub fn max(self, o: Self) -> Self {
        Vec3::new(self.x.max(o.x), self.y.max(o.y), self.z.max(o.z))
    }

    pub fn scale(self, s: T) -> Self {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn le_all(self, o: Self) -> bool {
        self.x <= o.x && self.y <= o.y && self.z <= o.z
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite()
    }

    /// Azimuth of the XY projection, radians in (−π, π].
    pub fn azimuth(self) -> T {
        self.y.atan2(self.x)
    }

    /// Angle above the XY plane, radians in [−π/2, π/2].
    pub fn elevation(self) -> T {
        self.z.atan2(self.horizontal_norm())
    }

    pub fn cast<U: Real>(self) -> Vec3<U> {
        Vec3::new(
            U::from_f64_lossy(self.x.to_f64_lossless()),
            U::from_f64_lossy(self.y.to_f64_lossless()),
            U::from_f64_lossy(self.z.to_f64_lossless()),
        )
    }

    pub fn to_array(self) -> [T; 3] {
        [self.x, self.y, self.z]
    }
}

impl<T: Real> Add for Vec3<T> {
    type Output = Self;
    #[inline]
    fn add(self, o: Self) -> Self {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }
}

impl<T: Real> AddAssign for Vec3<T> {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl<T: Real> Sub for Vec3<T> {
    type Output = Self;
    #[inline]
    fn sub(self, o: Self) -> Self {
        Vec3::new(self.x - o.x, self.y - o.y, self.z - o.z)
    }
}

impl<T: Real> Neg for Vec3<T> {
    type Output = Self;
    fn neg(self) -> Self {
        Vec3::new(-self.x, -self.y, -self.z)
    }
}

impl<T: Real> Mul<T> for Vec3<T> {
    type Output = Self;
    #[inline]
    fn mul(self, s: T) -> Self {
        self.scale(s)
    }
}

impl<T> Index<usize> for Vec3<T> {
    type Output = T;
    fn index(&self, i: usize) -> &T {
        match i {
            0 => &self.x,
            1 => &self.y,
            2 => &self.z,
            _ => panic!("Vec3 index {i} out of range"),
        }
    }
}

/// Axis-aligned box, closed on both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(serialize = "T: Real + Serialize", deserialize = "T: Real + Deserialize<'de>"))]
pub struct BoundingBox3D<T> {
    pub min_corner: Vec3<T>,
    pub max_corner: Vec3<T>,
}

impl<T: Real> BoundingBox3D<T> {
    /// Returns `None` when `min_corner ≤ max_corner` fails on some axis.
    pub fn new(min_corner: Vec3<T>, max_corner: Vec3<T>) -> Option<Self> {
        if min_corner.le_all(max_corner) {
            Some(BoundingBox3D { min_corner, max_corner })
        } else {
            None
        }
    }

    /// `[minx, miny, minz, maxx, maxy, maxz]`.
    pub fn from_array(a: [T; 6]) -> Option<Self> {
        Self::new(Vec3::new(a[0], a[1], a[2]), Vec3::new(a[3], a[4], a[5]))
    }

    pub fn to_array(&self) -> [T; 6] {
        let (a, b) = (self.min_corner, self.max_corner);
        [a.x, a.y, a.z, b.x, b.y, b.z]
    }

    /// Smallest box containing every point; `None` for an empty iterator.
    pub fn enclosing<I: IntoIterator<Item = Vec3<T>>>(points: I) -> Option<Self> {
        let mut it = points.into_iter();
        let first = it.next()?;
        let (lo, hi) = it.fold((first, first), |(lo, hi), p| (lo.min(p), hi.max(p)));
        Some(BoundingBox3D { min_corner: lo, max_corner: hi })
    }

    pub fn center(&self) -> Vec3<T> {
        (self.min_corner + self.max_corner).scale(T::lit(0.5))
    }

    pub fn extent(&self) -> Vec3<T> {
        self.max_corner - self.min_corner
    }

    pub fn volume(&self) -> T {
        let e = self.extent();
        e.x * e.y * e.z
    }

    pub fn contains(&self, p: Vec3<T>) -> bool {
        self.min_corner.le_all(p) && p.le_all(self.max_corner)
    }

    /// Overlap box, `None` when disjoint on some axis.
    pub fn intersection(&self, o: &Self) -> Option<Self> {
        Self::new(self.min_corner.max(o.min_corner), self.max_corner.min(o.max_corner))
    }
}

/// Upright rigid transform `p ↦ Rz(yaw)·p + translation`.
///
/// Only yaw is representable, so transformed avatars always stay upright.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YawTransform<T> {
    pub yaw: T,
    pub translation: Vec3<T>,
}

impl<T: Real> YawTransform<T> {
    pub fn identity() -> Self {
        YawTransform { yaw: T::zero(), translation: Vec3::zero() }
    }

    pub fn translation(t: Vec3<T>) -> Self {
        YawTransform { yaw: T::zero(), translation: t }
    }

    /// Rotation by `yaw` about the vertical line through `pivot`.
    pub fn about_vertical(pivot: Vec3<T>, yaw: T) -> Self {
        let r = Self { yaw, translation: Vec3::zero() };
        YawTransform { yaw, translation: pivot - r.rotate(pivot) }
    }

    /// Maps `local` to `world` after rotating by `yaw` about the vertical
    /// axis through `local`.
    pub fn anchored(local: Vec3<T>, world: Vec3<T>, yaw: T) -> Self {
        let r = Self { yaw, translation: Vec3::zero() };
        YawTransform { yaw, translation: world - r.rotate(local) }
    }

    #[inline]
    pub fn rotate(&self, v: Vec3<T>) -> Vec3<T> {
        let (s, c) = self.yaw.sin_cos();
        Vec3::new(c * v.x - s * v.y, s * v.x + c * v.y, v.z)
    }

    #[inline]
    pub fn apply(&self, p: Vec3<T>) -> Vec3<T> {
        self.rotate(p) + self.translation
    }

    /// `self ∘ first`: apply `first`, then `self`.
    pub fn compose(&self, first: &Self) -> Self {
        YawTransform {
            yaw: self.yaw + first.yaw,
            translation: self.rotate(first.translation) + self.translation,
        }
    }
}

/// Rotates a 2D vector (x, y) by `angle` radians.
pub(crate) fn rotate_xy<T: Real>(x: T, y: T, angle: T) -> (T, T) {
    let (s, c) = angle.sin_cos();
    (c * x - s * y, s * x + c * y)
}

/// Wraps an angle to (−π, π].
pub fn wrap_angle<T: Real>(a: T) -> T {
    let two_pi = T::PI() + T::PI();
    let mut r = a % two_pi;
    if r <= -T::PI() {
        r = r + two_pi;
    } else if r > T::PI() {
        r = r - two_pi;
    }
    r
}
