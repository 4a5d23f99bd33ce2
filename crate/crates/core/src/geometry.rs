//! Horizontal-plane vectors.

use core::ops::{Add, Mul, Neg, Sub};
#[allow(unused_imports)]
use num_traits::Float;

use serde::{Deserialize, Serialize};

/// A point or displacement in the horizontal plane, in meters.
///
/// Serialized as a two-element array `[x, y]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(from = "[f64; 2]", into = "[f64; 2]")]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub const fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, other: Vec2) -> f64 {
        self.x * other.x + self.y * other.y
    }

    pub fn norm(self) -> f64 {
        self.x.hypot(self.y)
    }

    pub fn distance(self, other: Vec2) -> f64 {
        (self - other).norm()
    }

    /// Linear interpolation: `self` at `t = 0`, `other` at `t = 1`.
    pub fn lerp(self, other: Vec2, t: f64) -> Vec2 {
        self + (other - self) * t
    }

    /// Closest point to `self` on the closed segment `[a, b]`.
    pub fn project_onto_segment(self, a: Vec2, b: Vec2) -> Vec2 {
        let ab = b - a;
        let len2 = ab.dot(ab);
        if len2 == 0.0 {
            return a;
        }
        let t = ((self - a).dot(ab) / len2).clamp(0.0, 1.0);
        a + ab * t
    }

    pub fn is_finite(self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// 3-D distance between a node at `(xy, h_node)` and a point at `(uav, h_uav)`.
pub fn distance_3d(node: Vec2, h_node: f64, uav: Vec2, h_uav: f64) -> f64 {
    let d = uav - node;
    let dz = h_uav - h_node;
    (d.x * d.x + d.y * d.y + dz * dz).sqrt()
}

impl From<[f64; 2]> for Vec2 {
    fn from(a: [f64; 2]) -> Self {
        Vec2::new(a[0], a[1])
    }
}

impl From<Vec2> for [f64; 2] {
    fn from(v: Vec2) -> Self {
        [v.x, v.y]
    }
}

impl Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, s: f64) -> Vec2 {
        Vec2::new(self.x * s, self.y * s)
    }
}

impl Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_clamps_to_segment() {
        let a = Vec2::new(0.0, 0.0);
        let b = Vec2::new(10.0, 0.0);
        assert_eq!(
            Vec2::new(3.0, 4.0).project_onto_segment(a, b),
            Vec2::new(3.0, 0.0)
        );
        assert_eq!(Vec2::new(-3.0, 4.0).project_onto_segment(a, b), a);
        assert_eq!(Vec2::new(13.0, -4.0).project_onto_segment(a, b), b);
        assert_eq!(Vec2::new(5.0, 5.0).project_onto_segment(a, a), a);
    }

    #[test]
    fn distance_3d_vertical() {
        assert_eq!(distance_3d(Vec2::ZERO, 0.0, Vec2::ZERO, 100.0), 100.0);
    }
}
