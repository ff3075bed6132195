use std::f64::consts::{PI, TAU};

use crate::mesh::{Aabb, Vec3};

/// Viewing direction as (azimuth, polar) angles. The canonical range is
/// `theta0 ∈ [0, 2π)`, `theta1 ∈ [0, π]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Direction2 {
    pub theta0: f64,
    pub theta1: f64,
}

impl Direction2 {
    pub fn new(theta0: f64, theta1: f64) -> Self {
        Direction2 { theta0, theta1 }
    }

    /// Angles of a (not necessarily unit) vector, in the canonical range.
    pub fn from_vector(v: &Vec3) -> Self {
        let n = v.norm();
        let z = (v.z / n).clamp(-1.0, 1.0);
        let mut theta0 = v.y.atan2(v.x);
        if theta0 < 0.0 {
            theta0 += TAU;
        }
        if theta0 >= TAU {
            theta0 -= TAU;
        }
        Direction2 {
            theta0,
            theta1: z.acos(),
        }
    }

    pub fn to_vector(&self) -> Vec3 {
        dir_to_vec(self)
    }

    /// Same direction expressed in the canonical angle ranges.
    pub fn canonical(&self) -> Self {
        Direction2::from_vector(&self.to_vector())
    }

    pub fn is_canonical(&self) -> bool {
        (0.0..TAU).contains(&self.theta0) && (0.0..=PI).contains(&self.theta1)
    }

    pub fn reversed(&self) -> Self {
        Direction2::from_vector(&-self.to_vector())
    }
}

/// `(cos θ0 sin θ1, sin θ0 sin θ1, cos θ1)`.
pub fn dir_to_vec(d: &Direction2) -> Vec3 {
    let (s0, c0) = d.theta0.sin_cos();
    let (s1, c1) = d.theta1.sin_cos();
    Vec3::new(c0 * s1, s0 * s1, c1)
}

/// A DDF query key: a position and a viewing direction.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OrientedPoint {
    pub position: Vec3,
    pub direction: Direction2,
}

impl OrientedPoint {
    pub fn new(position: Vec3, direction: Direction2) -> Self {
        OrientedPoint {
            position,
            direction,
        }
    }

    pub fn from_vector(position: Vec3, direction: &Vec3) -> Self {
        OrientedPoint {
            position,
            direction: Direction2::from_vector(direction),
        }
    }

    pub fn direction_vector(&self) -> Vec3 {
        dir_to_vec(&self.direction)
    }

    /// Point `t` along the viewing direction.
    pub fn advance(&self, t: f64) -> Vec3 {
        advance(self, t)
    }

    pub fn moved_to(&self, position: Vec3) -> Self {
        OrientedPoint {
            position,
            direction: self.direction,
        }
    }

    /// Logs (but accepts) positions outside the field's box.
    pub fn check_within(&self, bounds: &Aabb) -> bool {
        let inside = bounds.contains(&self.position);
        if !inside {
            log::trace!("oriented point {:?} lies outside {:?}", self.position, bounds);
        }
        inside
    }
}

pub fn advance(p: &OrientedPoint, t: f64) -> Vec3 {
    p.position + p.direction_vector() * t
}

/// Orthonormal pair perpendicular to unit `d`, built by crossing with the
/// coordinate axis along `d`'s smallest component.
pub fn perpendicular_frame(d: &Vec3) -> (Vec3, Vec3) {
    let a = d.abs();
    let axis = if a.x <= a.y && a.x <= a.z {
        Vec3::x()
    } else if a.y <= a.z {
        Vec3::y()
    } else {
        Vec3::z()
    };
    let u = axis.cross(d).normalize();
    let v = d.cross(&u);
    (u, v)
}
