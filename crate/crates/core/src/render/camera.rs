use crate::field::OrientedPoint;
use crate::mesh::Vec3;

/// Pinhole camera. The basis is right-handed: `forward` toward the target,
/// `right = forward × up`, film `y` grows downward.
#[derive(Clone, Debug, PartialEq)]
pub struct Camera {
    pub position: Vec3,
    pub target: Vec3,
    pub up_hint: Vec3,
    /// Vertical field of view in radians.
    pub fov_y: f64,
    pub width: usize,
    pub height: usize,
    forward: Vec3,
    right: Vec3,
    up: Vec3,
}

impl Camera {
    /// Panics on a zero-size film, a field of view outside `(0, π)` or an
    /// up hint parallel to the view axis.
    pub fn new(position: Vec3, target: Vec3, up_hint: Vec3, fov_y: f64, width: usize, height: usize) -> Self {
        assert!(width >= 1 && height >= 1, "film must be at least 1x1");
        assert!(fov_y > 0.0 && fov_y < std::f64::consts::PI, "fov {fov_y} outside (0, pi)");
        let forward = (target - position).normalize();
        let right = forward.cross(&up_hint);
        assert!(right.norm() > 1e-12, "up hint is parallel to the view direction");
        let right = right.normalize();
        let up = right.cross(&forward);
        Camera {
            position,
            target,
            up_hint,
            fov_y,
            width,
            height,
            forward,
            right,
            up,
        }
    }

    /// Camera on the `+z` (Y-up) or `-y` (Z-up) side of `target` at
    /// `distance`, looking at it.
    pub fn orbit(target: Vec3, distance: f64, fov_y: f64, width: usize, height: usize, z_up: bool) -> Self {
        if z_up {
            Camera::new(target - Vec3::y() * distance, target, Vec3::z(), fov_y, width, height)
        } else {
            Camera::new(target + Vec3::z() * distance, target, Vec3::y(), fov_y, width, height)
        }
    }

    pub fn basis(&self) -> (Vec3, Vec3, Vec3) {
        (self.right, self.up, self.forward)
    }

    /// Unit direction through film point `(px + jx, py + jy)`; `(0.5, 0.5)`
    /// is the pixel center.
    pub fn ray_direction(&self, px: usize, py: usize, (jx, jy): (f64, f64)) -> Vec3 {
        let tan_half = (0.5 * self.fov_y).tan();
        let aspect = self.width as f64 / self.height as f64;
        let sx = (2.0 * (px as f64 + jx) / self.width as f64 - 1.0) * tan_half * aspect;
        let sy = (1.0 - 2.0 * (py as f64 + jy) / self.height as f64) * tan_half;
        (self.forward + self.right * sx + self.up * sy).normalize()
    }

    pub fn primary_ray(&self, px: usize, py: usize, jitter: (f64, f64)) -> OrientedPoint {
        OrientedPoint::from_vector(self.position, &self.ray_direction(px, py, jitter))
    }
}
