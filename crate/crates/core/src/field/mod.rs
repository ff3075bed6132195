//! The directed distance field: query keys, backends and the geometric
//! identities every backend is expected to honor.
//!
//! A backend maps an oriented point `(x, θ)` to the distance along `θ` to the
//! first surface, or to a miss. Renderer, sampler and reconstruction only
//! talk to [`DdfBackend`], so the exact mesh oracle and the trained network
//! are interchangeable.

mod direction;
mod neural;

pub use direction::{advance, dir_to_vec, perpendicular_frame, Direction2, OrientedPoint};
pub use neural::{NeuralField, MISS_FRACTION, STEP_FRACTION};

use rayon::prelude::*;

use crate::error::{DdfError, Result};
use crate::mesh::{is_inside, Aabb, Bvh, HitRecord, Ray, RayQuery, TriangleMesh, Vec3};
use crate::util::radical_inverse_base2;

/// Field value: a finite distance or a miss (conceptually +∞).
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum DdfValue {
    Hit(f64),
    Miss,
}

impl DdfValue {
    pub fn is_hit(&self) -> bool {
        matches!(self, DdfValue::Hit(_))
    }

    pub fn t(&self) -> Option<f64> {
        match *self {
            DdfValue::Hit(t) => Some(t),
            DdfValue::Miss => None,
        }
    }

    /// Distance with misses mapped to `+∞`, for min/compare arithmetic only.
    pub fn or_infinity(&self) -> f64 {
        self.t().unwrap_or(f64::INFINITY)
    }
}

/// Uniform query interface over exact and learned fields. Implementations are
/// immutable and safe to query from many threads.
pub trait DdfBackend: Sync {
    fn name(&self) -> &str;

    /// Region `B` the field is defined over.
    fn bounds(&self) -> Aabb;

    fn query(&self, p: &OrientedPoint) -> DdfValue;

    fn query_many(&self, points: &[OrientedPoint]) -> Vec<DdfValue> {
        points.iter().map(|p| self.query(p)).collect()
    }

    fn visibility(&self, p: &OrientedPoint) -> bool {
        self.query(p).is_hit()
    }

    /// Unit surface normal at the hit seen from `p`, oriented against the
    /// viewing direction.
    fn normal(&self, p: &OrientedPoint) -> Result<Vec3>;

    /// Distance and normal in one go; backends that march override this to
    /// avoid marching twice.
    fn hit_with_normal(&self, p: &OrientedPoint) -> Option<(f64, Result<Vec3>)> {
        let t = self.query(p).t()?;
        Some((t, self.normal(p)))
    }

    fn hit_with_normal_many(&self, points: &[OrientedPoint]) -> Vec<Option<(f64, Result<Vec3>)>> {
        points.iter().map(|p| self.hit_with_normal(p)).collect()
    }

    /// Single-evaluation field value used when minimizing over directions
    /// (UDF). Exact backends return the ordinary query.
    fn local_query(&self, p: &OrientedPoint) -> DdfValue {
        self.query(p)
    }

    fn local_query_many(&self, points: &[OrientedPoint]) -> Vec<DdfValue> {
        points.iter().map(|p| self.local_query(p)).collect()
    }

    /// Exact unsigned distance, when the backend can compute it directly.
    fn exact_udf(&self, _x: &Vec3) -> Option<f64> {
        None
    }

    /// Offset used to leave a surface before tracing a secondary ray.
    fn surface_offset(&self) -> f64 {
        1e-7
    }
}

fn oriented_normal(hit: &HitRecord, view: &Vec3) -> Vec3 {
    let n = hit.geometric_normal;
    if n.dot(view) < 0.0 {
        n
    } else {
        -n
    }
}

/// Exact field backed by a BVH over the mesh.
pub struct OracleField {
    mesh: TriangleMesh,
    bvh: Bvh,
}

impl OracleField {
    pub fn new(mesh: TriangleMesh) -> Self {
        let bvh = Bvh::build(&mesh);
        OracleField { mesh, bvh }
    }

    pub fn mesh(&self) -> &TriangleMesh {
        &self.mesh
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    pub fn hit(&self, p: &OrientedPoint) -> Option<HitRecord> {
        let ray = Ray::new(p.position, p.direction_vector());
        self.bvh.intersect(&ray, 0.0, f64::INFINITY)
    }

    /// Whether `x` is enclosed by the mesh. The field is still answered
    /// geometrically from such points; callers that care can flag them.
    pub fn is_interior(&self, x: &Vec3) -> bool {
        is_inside(&self.bvh, x)
    }
}

impl DdfBackend for OracleField {
    fn name(&self) -> &str {
        "oracle"
    }

    fn bounds(&self) -> Aabb {
        self.mesh.bbox
    }

    fn query(&self, p: &OrientedPoint) -> DdfValue {
        match self.hit(p) {
            Some(h) => DdfValue::Hit(h.t),
            None => DdfValue::Miss,
        }
    }

    fn normal(&self, p: &OrientedPoint) -> Result<Vec3> {
        let hit = self.hit(p).ok_or(DdfError::NoSurface)?;
        Ok(oriented_normal(&hit, &p.direction_vector()))
    }

    fn hit_with_normal(&self, p: &OrientedPoint) -> Option<(f64, Result<Vec3>)> {
        let hit = self.hit(p)?;
        Some((hit.t, Ok(oriented_normal(&hit, &p.direction_vector()))))
    }

    fn exact_udf(&self, x: &Vec3) -> Option<f64> {
        self.bvh.closest_point(x).map(|(d, _, _)| d)
    }
}

/// Exact field by linear scan over every face; the unaccelerated reference.
pub struct BruteForceField {
    mesh: TriangleMesh,
}

impl BruteForceField {
    pub fn new(mesh: TriangleMesh) -> Self {
        BruteForceField { mesh }
    }

    pub fn hit(&self, p: &OrientedPoint) -> Option<HitRecord> {
        let ray = Ray::new(p.position, p.direction_vector());
        self.mesh.linear().intersect(&ray, 0.0, f64::INFINITY)
    }
}

impl DdfBackend for BruteForceField {
    fn name(&self) -> &str {
        "brute"
    }

    fn bounds(&self) -> Aabb {
        self.mesh.bbox
    }

    fn query(&self, p: &OrientedPoint) -> DdfValue {
        match self.hit(p) {
            Some(h) => DdfValue::Hit(h.t),
            None => DdfValue::Miss,
        }
    }

    fn normal(&self, p: &OrientedPoint) -> Result<Vec3> {
        let hit = self.hit(p).ok_or(DdfError::NoSurface)?;
        Ok(oriented_normal(&hit, &p.direction_vector()))
    }
}

pub fn query<B: DdfBackend + ?Sized>(backend: &B, p: &OrientedPoint) -> DdfValue {
    backend.query(p)
}

pub fn visibility<B: DdfBackend + ?Sized>(backend: &B, p: &OrientedPoint) -> bool {
    backend.visibility(p)
}

/// `q = x + φ(x, θ) θ`.
pub fn surface_point<B: DdfBackend + ?Sized>(backend: &B, p: &OrientedPoint) -> Result<Vec3> {
    let t = backend.query(p).t().ok_or(DdfError::NoSurface)?;
    Ok(p.advance(t))
}

/// Backend normal with the sign rule `n · θ < 0` checked on every call.
pub fn field_normal<B: DdfBackend + ?Sized>(backend: &B, p: &OrientedPoint) -> Result<Vec3> {
    let n = backend.normal(p)?;
    assert!(
        n.dot(&p.direction_vector()) < 0.0,
        "normal {n:?} does not face the viewing direction"
    );
    Ok(n)
}

/// `|φ(x, θ) − φ(x + tθ, θ) − t|`, or `None` if either end is invisible.
pub fn check_eikonal<B: DdfBackend + ?Sized>(
    backend: &B,
    p: &OrientedPoint,
    t: f64,
) -> Option<f64> {
    let here = backend.query(p).t()?;
    let there = backend.query(&p.moved_to(p.advance(t))).t()?;
    Some((here - there - t).abs())
}

/// Rotates `d` by the rotation vector `omega` (Rodrigues).
pub fn rotate(d: &Vec3, omega: &Vec3) -> Vec3 {
    let angle = omega.norm();
    if angle == 0.0 {
        return *d;
    }
    let k = omega / angle;
    let (s, c) = angle.sin_cos();
    d * c + k.cross(d) * s + k * (k.dot(d) * (1.0 - c))
}

/// Finite-difference check of the gradient consistency identity: the change
/// of φ under a small rotation `omega` of the viewing direction versus
/// `φ · ∂ₓφ · (ω × θ)`, with the position derivative taken by central
/// differences (step `h`). Works for any backend.
pub fn check_gradient_consistency_fd<B: DdfBackend + ?Sized>(
    backend: &B,
    p: &OrientedPoint,
    omega: &Vec3,
    h: f64,
) -> Option<f64> {
    let phi = backend.query(p).t()?;
    let d = p.direction_vector();
    let delta = omega.cross(&d);
    if delta.norm() == 0.0 {
        return Some(0.0);
    }
    let rotated = OrientedPoint::from_vector(p.position, &rotate(&d, omega));
    let lhs = backend.query(&rotated).t()? - phi;
    let u = delta.normalize();
    let plus = backend.query(&p.moved_to(p.position + u * h)).t()?;
    let minus = backend.query(&p.moved_to(p.position - u * h)).t()?;
    let rhs = phi * (plus - minus) / (2.0 * h) * delta.norm();
    Some((lhs - rhs).abs())
}

/// Nested low-discrepancy direction sequence: golden-angle azimuths and
/// radical-inverse heights. The first `n` directions of a longer set are
/// exactly the set for `n`, so refining never loses a direction.
pub fn direction_set(n: usize) -> Vec<Vec3> {
    let golden = (5f64.sqrt() - 1.0) / 2.0;
    (0..n as u64)
        .map(|i| {
            // Fixed (n-independent) shift keeps prefixes identical across n
            // and keeps i = 0 off the pole.
            let u = (radical_inverse_base2(i) + 0.031_415_926_5).fract();
            let z = 1.0 - 2.0 * u;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let phi = std::f64::consts::TAU * ((i as f64) * golden).fract();
            Vec3::new(r * phi.cos(), r * phi.sin(), z)
        })
        .collect()
}

const POLISH_ITERATIONS: usize = 8;
/// Smallest prefix that still gets its own polish pass.
const MIN_POLISH_LEVEL: usize = 8;
const UDF_CHUNK: usize = 128;

/// Prefix sizes whose best direction is polished: `n, n/2, n/4, ...` while
/// the size stays even and at least [`MIN_POLISH_LEVEL`]. Doubling `n` only
/// prepends a level, so results can only improve with refinement.
fn polish_levels(n: usize) -> Vec<usize> {
    let mut levels = vec![n];
    let mut m = n;
    while m % 2 == 0 && m / 2 >= MIN_POLISH_LEVEL {
        m /= 2;
        levels.push(m);
    }
    levels
}

/// Lockstep golden-section line searches, one per (point, center, axis).
/// Returns the best value found on each line and its parameter.
fn golden_lines<B: DdfBackend + ?Sized>(
    backend: &B,
    lines: &[(Vec3, Vec3, Vec3)],
    half: f64,
) -> Vec<(f64, f64)> {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let eval = |params: &[f64]| -> Vec<f64> {
        let keys: Vec<OrientedPoint> = lines
            .iter()
            .zip(params)
            .map(|((x, c, e), &s)| OrientedPoint::from_vector(*x, &(c + e * s)))
            .collect();
        backend.local_query_many(&keys).iter().map(|v| v.or_infinity()).collect()
    };
    let k = lines.len();
    let mut a = vec![-half; k];
    let mut b = vec![half; k];
    let mut c: Vec<f64> = (0..k).map(|i| b[i] - (b[i] - a[i]) * inv_phi).collect();
    let mut d: Vec<f64> = (0..k).map(|i| a[i] + (b[i] - a[i]) * inv_phi).collect();
    let mut fc = eval(&c);
    let mut fd = eval(&d);
    for _ in 0..POLISH_ITERATIONS {
        let mut probe = vec![0.0; k];
        let mut left = vec![false; k];
        for i in 0..k {
            if fc[i] < fd[i] {
                b[i] = d[i];
                d[i] = c[i];
                fd[i] = fc[i];
                c[i] = b[i] - (b[i] - a[i]) * inv_phi;
                probe[i] = c[i];
                left[i] = true;
            } else {
                a[i] = c[i];
                c[i] = d[i];
                fc[i] = fd[i];
                d[i] = a[i] + (b[i] - a[i]) * inv_phi;
                probe[i] = d[i];
            }
        }
        let fp = eval(&probe);
        for i in 0..k {
            if left[i] {
                fc[i] = fp[i];
            } else {
                fd[i] = fp[i];
            }
        }
    }
    (0..k)
        .map(|i| if fc[i] < fd[i] { (fc[i], c[i]) } else { (fd[i], d[i]) })
        .collect()
}

fn udf_chunk<B: DdfBackend + ?Sized>(
    backend: &B,
    xs: &[Vec3],
    dirs: &[Vec3],
    polish_cutoff: f64,
) -> Vec<DdfValue> {
    let n = dirs.len();
    let keys: Vec<OrientedPoint> = xs
        .iter()
        .flat_map(|x| dirs.iter().map(move |d| OrientedPoint::from_vector(*x, d)))
        .collect();
    let values: Vec<f64> = backend.local_query_many(&keys).iter().map(|v| v.or_infinity()).collect();
    let mut result: Vec<f64> = values
        .chunks(n)
        .map(|row| row.iter().copied().fold(f64::INFINITY, f64::min))
        .collect();

    for m in polish_levels(n) {
        // Best direction within the first m, per point (lowest index on ties).
        let mut owners = Vec::new();
        let mut lines = Vec::new();
        for (i, row) in values.chunks(n).enumerate() {
            let (j, best) = row[..m]
                .iter()
                .enumerate()
                .fold((0, f64::INFINITY), |acc, (j, &v)| if v < acc.1 { (j, v) } else { acc });
            if best.is_finite() && best <= polish_cutoff {
                let (e1, _) = perpendicular_frame(&dirs[j]);
                owners.push((i, j));
                lines.push((xs[i], dirs[j], e1));
            }
        }
        if lines.is_empty() {
            continue;
        }
        let half = (4.0 * std::f64::consts::PI / m as f64).sqrt();
        let first = golden_lines(backend, &lines, half);
        let second_lines: Vec<(Vec3, Vec3, Vec3)> = owners
            .iter()
            .zip(&lines)
            .zip(&first)
            .map(|((&(_, j), &(x, c, e1)), &(_, s))| {
                let (_, e2) = perpendicular_frame(&dirs[j]);
                (x, c + e1 * s, e2)
            })
            .collect();
        let second = golden_lines(backend, &second_lines, half);
        for ((&(i, _), f1), f2) in owners.iter().zip(&first).zip(&second) {
            result[i] = result[i].min(f1.0).min(f2.0);
        }
    }
    result
        .into_iter()
        .map(|v| if v.is_finite() { DdfValue::Hit(v) } else { DdfValue::Miss })
        .collect()
}

/// Sampled unsigned distance for many points: minimum of the field over the
/// first `n_dirs` directions of [`direction_set`], refined by golden-section
/// polishing along two tangent axes around the best direction of each
/// prefix in a halving chain. Points whose best sample exceeds
/// `polish_cutoff` skip the polish. Never uses an exact shortcut.
pub fn udf_sampled_many<B: DdfBackend + ?Sized>(
    backend: &B,
    xs: &[Vec3],
    n_dirs: usize,
    polish_cutoff: f64,
) -> Vec<DdfValue> {
    let dirs = direction_set(n_dirs.max(2));
    xs.par_chunks(UDF_CHUNK)
        .flat_map_iter(|chunk| udf_chunk(backend, chunk, &dirs, polish_cutoff))
        .collect()
}

pub fn udf_sampled<B: DdfBackend + ?Sized>(backend: &B, x: &Vec3, n_dirs: usize) -> DdfValue {
    udf_chunk(backend, std::slice::from_ref(x), &direction_set(n_dirs.max(2)), f64::INFINITY)[0]
}

/// Unsigned distance at `x`: the exact closest-point distance when the
/// backend offers one, the sampled minimum otherwise.
pub fn udf<B: DdfBackend + ?Sized>(backend: &B, x: &Vec3, n_dirs: usize) -> DdfValue {
    match backend.exact_udf(x) {
        Some(d) => DdfValue::Hit(d),
        None => udf_sampled(backend, x, n_dirs),
    }
}

/// Queries many oriented points in parallel, preserving order.
pub fn par_query<B: DdfBackend + ?Sized>(backend: &B, points: &[OrientedPoint]) -> Vec<DdfValue> {
    points
        .par_chunks(1024)
        .flat_map_iter(|chunk| backend.query_many(chunk))
        .collect()
}
