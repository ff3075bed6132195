//! Triangle meshes, rays and exact ray queries.
//!
//! Everything downstream treats the mesh as ground truth: the BVH answers
//! nearest-hit queries, a linear scan answers the same queries without
//! acceleration, and the parity test classifies points as inside/outside.

mod bvh;
mod inside;
mod obj;
pub mod primitives;

pub use bvh::{Bvh, BvhNode, MAX_LEAF_TRIANGLES};
pub use inside::{is_inside, is_inside_with_direction};
pub use obj::{load_mesh, parse_obj, write_obj};

use nalgebra::Vector3;

use crate::error::{DdfError, Result};

pub type Vec3 = Vector3<f64>;

/// Determinant threshold of the ray/triangle test.
pub const DET_EPSILON: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Aabb {
    pub min: Vec3,
    pub max: Vec3,
}

impl Aabb {
    pub fn empty() -> Self {
        Aabb {
            min: Vec3::repeat(f64::INFINITY),
            max: Vec3::repeat(f64::NEG_INFINITY),
        }
    }

    pub fn new(min: Vec3, max: Vec3) -> Self {
        Aabb { min, max }
    }

    pub fn from_points<'a>(points: impl IntoIterator<Item = &'a Vec3>) -> Self {
        let mut bb = Aabb::empty();
        for p in points {
            bb.grow(p);
        }
        bb
    }

    pub fn grow(&mut self, p: &Vec3) {
        self.min = self.min.inf(p);
        self.max = self.max.sup(p);
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: self.min.inf(&other.min),
            max: self.max.sup(&other.max),
        }
    }

    pub fn is_empty(&self) -> bool {
        (0..3).any(|i| self.min[i] > self.max[i])
    }

    pub fn contains(&self, p: &Vec3) -> bool {
        (0..3).all(|i| p[i] >= self.min[i] && p[i] <= self.max[i])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        self.contains(&other.min) && self.contains(&other.max)
    }

    pub fn extent(&self) -> Vec3 {
        self.max - self.min
    }

    pub fn center(&self) -> Vec3 {
        (self.min + self.max) * 0.5
    }

    pub fn diagonal(&self) -> f64 {
        self.extent().norm()
    }

    pub fn longest_axis(&self) -> usize {
        let e = self.extent();
        if e.x >= e.y && e.x >= e.z {
            0
        } else if e.y >= e.z {
            1
        } else {
            2
        }
    }

    /// Grows the box by `margin` on every side.
    pub fn padded(&self, margin: f64) -> Aabb {
        Aabb {
            min: self.min - Vec3::repeat(margin),
            max: self.max + Vec3::repeat(margin),
        }
    }

    /// Slab test. Returns the parametric interval `[t0, t1]` clipped to
    /// `[t_min, t_max]`, or `None` when the ray misses the box.
    pub fn ray_interval(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<(f64, f64)> {
        let mut t0 = t_min;
        let mut t1 = t_max;
        for i in 0..3 {
            let inv = 1.0 / ray.direction[i];
            let mut near = (self.min[i] - ray.origin[i]) * inv;
            let mut far = (self.max[i] - ray.origin[i]) * inv;
            if near > far {
                std::mem::swap(&mut near, &mut far);
            }
            // NaN (0 * inf) on an axis-parallel ray lying in a slab plane
            // leaves the interval untouched.
            if near > t0 {
                t0 = near;
            }
            if far < t1 {
                t1 = far;
            }
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }

    /// Squared distance from `p` to the box (0 inside).
    pub fn distance_squared(&self, p: &Vec3) -> f64 {
        let mut d = 0.0;
        for i in 0..3 {
            let v = if p[i] < self.min[i] {
                self.min[i] - p[i]
            } else if p[i] > self.max[i] {
                p[i] - self.max[i]
            } else {
                0.0
            };
            d += v * v;
        }
        d
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Ray {
    pub origin: Vec3,
    pub direction: Vec3,
}

impl Ray {
    /// Builds a ray, normalizing `direction`.
    pub fn new(origin: Vec3, direction: Vec3) -> Self {
        Ray {
            origin,
            direction: direction.normalize(),
        }
    }

    pub fn at(&self, t: f64) -> Vec3 {
        self.origin + self.direction * t
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HitRecord {
    pub t: f64,
    pub face: usize,
    /// Unit normal of the hit face, wound by the face's vertex order.
    pub geometric_normal: Vec3,
    /// Barycentric weights of vertices 1 and 2.
    pub barycentric: (f64, f64),
}

impl HitRecord {
    /// Smallest of the three barycentric weights; near zero means an edge hit.
    pub fn edge_distance(&self) -> f64 {
        let (u, v) = self.barycentric;
        u.min(v).min(1.0 - u - v)
    }

    /// True when `self` should replace `other` as the nearest hit. Ties on
    /// `t` go to the lower face index so every query path agrees exactly.
    pub(crate) fn closer_than(&self, other: &HitRecord) -> bool {
        self.t < other.t || (self.t == other.t && self.face < other.face)
    }
}

/// Ray/triangle test on precomputed edges. Returns `(t, u, v)`.
#[inline]
pub(crate) fn intersect_triangle(
    ray: &Ray,
    v0: &Vec3,
    e1: &Vec3,
    e2: &Vec3,
    t_min: f64,
    t_max: f64,
) -> Option<(f64, f64, f64)> {
    let pvec = ray.direction.cross(e2);
    let det = e1.dot(&pvec);
    if det.abs() < DET_EPSILON {
        return None;
    }
    let inv_det = 1.0 / det;
    let tvec = ray.origin - v0;
    let u = tvec.dot(&pvec) * inv_det;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let qvec = tvec.cross(e1);
    let v = ray.direction.dot(&qvec) * inv_det;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    let t = e2.dot(&qvec) * inv_det;
    if t < t_min || t > t_max {
        return None;
    }
    Some((t, u, v))
}

/// Anything that can answer nearest-hit and all-hit ray queries against a
/// fixed triangle set.
pub trait RayQuery: Sync {
    fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<HitRecord>;

    /// Every crossing with `t >= t_min`, unsorted.
    fn intersect_all(&self, ray: &Ray, t_min: f64) -> Vec<HitRecord>;

    fn bounds(&self) -> Aabb;
}

#[derive(Clone, Debug)]
pub struct TriangleMesh {
    pub vertices: Vec<Vec3>,
    pub faces: Vec<[usize; 3]>,
    pub bbox: Aabb,
}

impl TriangleMesh {
    /// Validates indices and computes the bounding box.
    pub fn new(vertices: Vec<Vec3>, faces: Vec<[usize; 3]>) -> Result<Self> {
        let count = vertices.len();
        for (fi, f) in faces.iter().enumerate() {
            if let Some(&index) = f.iter().find(|&&i| i >= count) {
                return Err(DdfError::IndexOutOfRange {
                    face: fi,
                    index,
                    count,
                });
            }
        }
        let bbox = Aabb::from_points(&vertices);
        Ok(TriangleMesh {
            vertices,
            faces,
            bbox,
        })
    }

    pub fn is_empty(&self) -> bool {
        self.faces.is_empty()
    }

    pub fn triangle(&self, face: usize) -> [Vec3; 3] {
        let [a, b, c] = self.faces[face];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    /// Unnormalized normal (twice the area vector).
    pub fn face_cross(&self, face: usize) -> Vec3 {
        let [a, b, c] = self.triangle(face);
        (b - a).cross(&(c - a))
    }

    pub fn face_area(&self, face: usize) -> f64 {
        0.5 * self.face_cross(face).norm()
    }

    pub fn face_normal(&self, face: usize) -> Vec3 {
        self.face_cross(face).normalize()
    }

    pub fn surface_area(&self) -> f64 {
        (0..self.faces.len()).map(|f| self.face_area(f)).sum()
    }

    /// Centers the mesh at the origin and scales it uniformly so its longest
    /// bounding box edge is 2.
    pub fn normalize(&self) -> Result<TriangleMesh> {
        if self.vertices.is_empty() {
            return Err(DdfError::EmptyMesh);
        }
        let extent = self.bbox.extent();
        let longest = extent.max();
        if !(longest > 0.0) || !longest.is_finite() {
            return Err(DdfError::DegenerateMesh(format!(
                "bounding box extent {:?}",
                extent
            )));
        }
        let center = self.bbox.center();
        let scale = 2.0 / longest;
        let vertices = self
            .vertices
            .iter()
            .map(|v| (v - center) * scale)
            .collect();
        TriangleMesh::new(vertices, self.faces.clone())
    }

    /// Linear-scan view used as the unaccelerated reference.
    pub fn linear(&self) -> LinearScan<'_> {
        LinearScan { mesh: self }
    }

    /// Number of faces sharing each undirected edge; a closed 2-manifold has
    /// exactly two everywhere.
    pub fn is_edge_manifold(&self) -> bool {
        use std::collections::HashMap;
        let mut edges: HashMap<(usize, usize), u32> = HashMap::new();
        for f in &self.faces {
            for k in 0..3 {
                let (a, b) = (f[k], f[(k + 1) % 3]);
                *edges.entry((a.min(b), a.max(b))).or_default() += 1;
            }
        }
        !edges.is_empty() && edges.values().all(|&c| c == 2)
    }
}

/// Brute-force query over every face in index order.
#[derive(Clone, Copy)]
pub struct LinearScan<'a> {
    mesh: &'a TriangleMesh,
}

impl LinearScan<'_> {
    fn hit_face(&self, ray: &Ray, face: usize, t_min: f64, t_max: f64) -> Option<HitRecord> {
        let [v0, v1, v2] = self.mesh.triangle(face);
        let e1 = v1 - v0;
        let e2 = v2 - v0;
        intersect_triangle(ray, &v0, &e1, &e2, t_min, t_max).map(|(t, u, v)| HitRecord {
            t,
            face,
            geometric_normal: e1.cross(&e2).normalize(),
            barycentric: (u, v),
        })
    }
}

impl RayQuery for LinearScan<'_> {
    fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<HitRecord> {
        let mut best: Option<HitRecord> = None;
        for face in 0..self.mesh.faces.len() {
            if let Some(hit) = self.hit_face(ray, face, t_min, t_max) {
                if best.map_or(true, |b| hit.closer_than(&b)) {
                    best = Some(hit);
                }
            }
        }
        best
    }

    fn intersect_all(&self, ray: &Ray, t_min: f64) -> Vec<HitRecord> {
        (0..self.mesh.faces.len())
            .filter_map(|face| self.hit_face(ray, face, t_min, f64::INFINITY))
            .collect()
    }

    fn bounds(&self) -> Aabb {
        self.mesh.bbox
    }
}

/// Closest point on triangle `abc` to `p` (Ericson, Real-Time Collision
/// Detection, 5.1.5).
pub fn closest_point_on_triangle(p: &Vec3, a: &Vec3, b: &Vec3, c: &Vec3) -> Vec3 {
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return *a;
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return *b;
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return a + ab * v;
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return *c;
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return a + ac * w;
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return b + (c - b) * w;
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    a + ab * v + ac * w
}
