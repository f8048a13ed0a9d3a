//! Points on the flat 2-torus and the wrap-around metric.

use nalgebra::Vector2;
use serde::{Deserialize, Serialize};

pub type Vec2 = Vector2<f64>;
pub type Mat2 = nalgebra::Matrix2<f64>;

/// Reduce a coordinate into `[0, 1)`.
#[inline]
pub fn wrap(x: f64) -> f64 {
    let r = x - x.floor();
    // `x.floor()` can round such that r == 1.0 for tiny negative x.
    if r >= 1.0 {
        r - 1.0
    } else {
        r
    }
}

/// Signed representative of `x mod 1` in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_signed(x: f64) -> f64 {
    let r = wrap(x);
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// A point on T² = (ℝ/ℤ)², coordinates always reduced into `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TorusPoint {
    pub x: f64,
    pub y: f64,
}

impl TorusPoint {
    #[inline]
    pub fn new(x: f64, y: f64) -> Self {
        Self {
            x: wrap(x),
            y: wrap(y),
        }
    }

    #[inline]
    pub fn from_vec(v: Vec2) -> Self {
        Self::new(v.x, v.y)
    }

    #[inline]
    pub fn as_vec(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Shortest displacement `other - self` on the torus, components in `[-1/2, 1/2)`.
    #[inline]
    pub fn displacement_to(&self, other: &TorusPoint) -> Vec2 {
        Vec2::new(wrap_signed(other.x - self.x), wrap_signed(other.y - self.y))
    }

    /// Flat-torus distance: Euclidean length of the shortest lift.
    #[inline]
    pub fn dist(&self, other: &TorusPoint) -> f64 {
        self.displacement_to(other).norm()
    }

    /// Translate by an ambient vector (result wrapped back into the fundamental domain).
    #[inline]
    pub fn offset(&self, v: Vec2) -> TorusPoint {
        TorusPoint::new(self.x + v.x, self.y + v.y)
    }
}

/// Angle in `[0, π/2]` between the lines spanned by two nonzero vectors.
pub fn line_angle(a: &Vec2, b: &Vec2) -> f64 {
    let c = (a.dot(b) / (a.norm() * b.norm())).abs().min(1.0);
    c.acos()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn wrap_reduces_into_unit_interval() {
        assert_eq!(wrap(1.25), 0.25);
        assert_eq!(wrap(-0.25), 0.75);
        assert_eq!(wrap(3.0), 0.0);
        assert!(wrap(-1e-17) < 1.0);
        assert!(wrap(-1e-17) >= 0.0);
    }

    #[test]
    fn distance_is_shortest_lift() {
        let p = TorusPoint::new(0.05, 0.5);
        let q = TorusPoint::new(0.95, 0.5);
        assert!((p.dist(&q) - 0.1).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn distance_symmetric_and_bounded(ax in 0.0..1.0, ay in 0.0..1.0, bx in 0.0..1.0, by in 0.0..1.0) {
            let a = TorusPoint::new(ax, ay);
            let b = TorusPoint::new(bx, by);
            prop_assert!((a.dist(&b) - b.dist(&a)).abs() < 1e-15);
            // componentwise bound 1/2 gives the √2/2 diameter
            prop_assert!(a.dist(&b) <= (0.5f64 * 0.5 + 0.5 * 0.5).sqrt() + 1e-15);
        }

        #[test]
        fn triangle_inequality(ax in 0.0..1.0, ay in 0.0..1.0, bx in 0.0..1.0, by in 0.0..1.0, cx in 0.0..1.0, cy in 0.0..1.0) {
            let a = TorusPoint::new(ax, ay);
            let b = TorusPoint::new(bx, by);
            let c = TorusPoint::new(cx, cy);
            prop_assert!(a.dist(&c) <= a.dist(&b) + b.dist(&c) + 1e-12);
        }

        #[test]
        fn offset_then_displacement_roundtrip(px in 0.0..1.0, py in 0.0..1.0, vx in -0.49..0.49, vy in -0.49..0.49) {
            let p = TorusPoint::new(px, py);
            let q = p.offset(Vec2::new(vx, vy));
            let d = p.displacement_to(&q);
            prop_assert!((d.x - vx).abs() < 1e-12);
            prop_assert!((d.y - vy).abs() < 1e-12);
        }
    }
}
