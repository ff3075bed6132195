//! Training data from a ground-truth mesh.
//!
//! Three strategies: `ours` walks rays away from surface points and records
//! the distance back to the surface (plus misses), `random` draws positions
//! uniformly in the box, and `pov` shoots camera rays from 50 viewpoints.

mod io;

pub use io::{read_dataset, write_dataset, DATASET_MAGIC, RECORD_BYTES};

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;

use crate::error::{DdfError, Result};
use crate::field::{perpendicular_frame, DdfValue, Direction2, OrientedPoint};
use crate::mesh::{is_inside, Bvh, Ray, RayQuery, TriangleMesh, Vec3};
use crate::render::Camera;
use crate::util::stream_rng;

/// One training example: oriented point and its field value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FieldSample {
    pub position: Vec3,
    pub direction: Direction2,
    pub target: DdfValue,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Strategy {
    Ours,
    Random,
    Pov,
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Strategy::Ours => "ours",
            Strategy::Random => "random",
            Strategy::Pov => "pov",
        })
    }
}

impl FromStr for Strategy {
    type Err = DdfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ours" => Ok(Strategy::Ours),
            "random" => Ok(Strategy::Random),
            "pov" => Ok(Strategy::Pov),
            other => Err(DdfError::InvalidArgument(format!("unknown strategy '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SamplerConfig {
    pub s_fc: usize,
    pub s_dr: usize,
    pub s_p: usize,
    /// March step; `None` means [`default_step`].
    pub step: Option<f64>,
    pub strategy: Strategy,
    pub seed: u64,
    /// Sample count for the random strategy.
    pub count: usize,
    /// Film size (square) for the pov strategy.
    pub film: usize,
    /// Drop marched rays that enter the mesh (odd-even rule). Only honoured
    /// on closed meshes.
    pub inside_test: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            s_fc: 10,
            s_dr: 10,
            s_p: 10,
            step: None,
            strategy: Strategy::Ours,
            seed: 0,
            count: 100_000,
            film: 64,
            inside_test: true,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.s_fc == 0 || self.s_dr == 0 || self.s_p == 0 {
            return Err(DdfError::InvalidArgument("s_fc, s_dr and s_p must be at least 1".into()));
        }
        if let Some(step) = self.step {
            if !(step > 0.0 && step.is_finite()) {
                return Err(DdfError::InvalidArgument(format!("step must be positive, got {step}")));
            }
        }
        if self.film == 0 {
            return Err(DdfError::InvalidArgument("film size must be at least 1".into()));
        }
        Ok(())
    }
}

/// `2 · diagonal / (s_p · 10)`: each ray probes a tenth of the diagonal.
pub fn default_step(mesh: &TriangleMesh, s_p: usize) -> f64 {
    2.0 * mesh.bbox.diagonal() / (s_p as f64 * 10.0)
}

/// `(1 − a − b) p0 + a p1 + b p2`, folded back into the triangle when
/// `a + b > 1`.
pub fn barycentric_point(tri: &[Vec3; 3], a: f64, b: f64) -> Vec3 {
    let (a, b) = if a + b > 1.0 { (1.0 - a, 1.0 - b) } else { (a, b) };
    tri[0] * (1.0 - a - b) + tri[1] * a + tri[2] * b
}

/// `s_fc` uniform points on a face. Zero-area faces give none.
pub fn sample_face_points<R: Rng + ?Sized>(
    mesh: &TriangleMesh,
    face: usize,
    s_fc: usize,
    rng: &mut R,
) -> Vec<Vec3> {
    if mesh.face_area(face) == 0.0 {
        log::warn!("skipping degenerate face {face}");
        return Vec::new();
    }
    let tri = mesh.triangle(face);
    (0..s_fc)
        .map(|_| {
            let a = rng.gen::<f64>();
            let b = rng.gen::<f64>();
            barycentric_point(&tri, a, b)
        })
        .collect()
}

/// Maps the sampler's unit draws to a canonical direction: polar `aπ`,
/// azimuth `2bπ`.
pub fn direction_from_unit(a: f64, b: f64) -> Direction2 {
    let mut theta0 = TAU * b;
    if theta0 >= TAU {
        theta0 -= TAU;
    }
    Direction2::new(theta0, PI * a)
}

/// `s_dr` directions, uniform in both angles (so denser near the poles).
pub fn sample_directions<R: Rng + ?Sized>(s_dr: usize, rng: &mut R) -> Vec<Direction2> {
    (0..s_dr)
        .map(|_| {
            let a = rng.gen::<f64>();
            let b = rng.gen::<f64>();
            direction_from_unit(a, b)
        })
        .collect()
}

/// Forward rays from a surface point skip hits closer than this, so the
/// ray does not immediately re-hit the face it starts on.
const SURFACE_EPSILON: f64 = 1e-7;

/// Marches from surface point `q` along `theta`, emitting back-pointing
/// samples `(p_k, −θ; k·step)` for `k = 1..=s_p`. The whole ray is dropped
/// if any `p_k` lies inside the (closed) mesh; marching stops before the
/// first other face hit along the way. If the forward ray escapes, each
/// `p_k` also yields a miss sample along `θ`, and along each of the two
/// frame directions perpendicular to `θ` that also escapes.
pub fn march_and_collect<Q: RayQuery + ?Sized>(
    query: &Q,
    closed: bool,
    q: &Vec3,
    theta: &Direction2,
    s_p: usize,
    step: f64,
) -> Vec<FieldSample> {
    let d = theta.to_vector();
    let back = Direction2::from_vector(&-d);
    let forward_hit = query.intersect(&Ray::new(*q, d), SURFACE_EPSILON, f64::INFINITY);
    let mut points = Vec::with_capacity(s_p);
    for k in 1..=s_p {
        let t = k as f64 * step;
        if let Some(h) = &forward_hit {
            if t >= h.t {
                break;
            }
        }
        let p = q + d * t;
        if closed && is_inside(query, &p) {
            return Vec::new();
        }
        points.push((p, t));
    }

    let mut out = Vec::with_capacity(points.len() * 4);
    let (u, _) = perpendicular_frame(&d);
    for (p, t) in points {
        out.push(FieldSample {
            position: p,
            direction: back,
            target: DdfValue::Hit(t),
        });
        if forward_hit.is_none() {
            out.push(FieldSample {
                position: p,
                direction: *theta,
                target: DdfValue::Miss,
            });
            for side in [u, -u] {
                if query.intersect(&Ray::new(p, side), 0.0, f64::INFINITY).is_none() {
                    out.push(FieldSample {
                        position: p,
                        direction: Direction2::from_vector(&side),
                        target: DdfValue::Miss,
                    });
                }
            }
        }
    }
    out
}

/// Sample counts by kind.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct SampleTally {
    pub finite: usize,
    pub miss: usize,
    /// Misses along a direction perpendicular to a marched ray (`ours`
    /// only); not included in `miss`.
    pub perpendicular: usize,
}

/// Counts samples by kind. For `ours` datasets a miss that directly
/// follows another miss at the same position is a perpendicular sample.
pub fn tally(samples: &[FieldSample], strategy: Strategy) -> SampleTally {
    let mut t = SampleTally::default();
    for (i, s) in samples.iter().enumerate() {
        match s.target {
            DdfValue::Hit(_) => t.finite += 1,
            DdfValue::Miss => {
                let follows_miss = i > 0
                    && !samples[i - 1].target.is_hit()
                    && samples[i - 1].position == s.position;
                if strategy == Strategy::Ours && follows_miss {
                    t.perpendicular += 1;
                } else {
                    t.miss += 1;
                }
            }
        }
    }
    t
}

/// Oracle field value for an oriented point.
fn oracle_value(bvh: &Bvh, p: &OrientedPoint) -> DdfValue {
    match bvh.intersect(&Ray::new(p.position, p.direction_vector()), 0.0, f64::INFINITY) {
        Some(h) => DdfValue::Hit(h.t),
        None => DdfValue::Miss,
    }
}

/// The 50 pov cameras: 10 azimuths by 5 polar rings on a sphere of radius
/// 2.5 around the mesh center, each framing the mesh's bounding sphere.
pub fn pov_cameras(mesh: &TriangleMesh, film: usize) -> Vec<Camera> {
    let center = mesh.bbox.center();
    let radius = 0.5 * mesh.bbox.diagonal();
    let distance = 2.5;
    let half = ((radius * 1.05) / distance).min(0.99).asin();
    let mut cams = Vec::with_capacity(50);
    for j in 0..5 {
        let polar = PI * (j as f64 + 0.5) / 5.0;
        for i in 0..10 {
            let azimuth = TAU * i as f64 / 10.0;
            let eye = center
                + Vec3::new(
                    polar.sin() * azimuth.cos(),
                    polar.sin() * azimuth.sin(),
                    polar.cos(),
                ) * distance;
            cams.push(Camera::new(eye, center, Vec3::z(), 2.0 * half, film, film));
        }
    }
    cams
}

const RANDOM_CHUNK: usize = 4096;

/// Builds a dataset. Work is split into independent units (faces, chunks,
/// cameras) each with its own random stream, so the result does not depend
/// on the number of worker threads.
pub fn build_dataset(mesh: &TriangleMesh, config: &SamplerConfig) -> Result<Vec<FieldSample>> {
    config.validate()?;
    if mesh.is_empty() {
        return Err(DdfError::EmptyMesh);
    }
    let bvh = Bvh::build(mesh);
    let samples = match config.strategy {
        Strategy::Ours => {
            let step = config.step.unwrap_or_else(|| default_step(mesh, config.s_p));
            let closed = config.inside_test && mesh.is_edge_manifold();
            if config.inside_test && !closed {
                log::warn!("mesh is not closed; interior rejection disabled");
            }
            (0..mesh.faces.len())
                .into_par_iter()
                .map(|face| {
                    let mut rng = stream_rng(config.seed, face as u64);
                    let mut out = Vec::new();
                    for q in sample_face_points(mesh, face, config.s_fc, &mut rng) {
                        for theta in sample_directions(config.s_dr, &mut rng) {
                            out.extend(march_and_collect(&bvh, closed, &q, &theta, config.s_p, step));
                        }
                    }
                    out
                })
                .collect::<Vec<_>>()
                .concat()
        }
        Strategy::Random => {
            let bbox = mesh.bbox;
            let chunks = config.count.div_ceil(RANDOM_CHUNK);
            (0..chunks)
                .into_par_iter()
                .map(|c| {
                    let mut rng = stream_rng(config.seed, c as u64);
                    let n = RANDOM_CHUNK.min(config.count - c * RANDOM_CHUNK);
                    (0..n)
                        .map(|_| {
                            let e = bbox.extent();
                            let position = bbox.min
                                + Vec3::new(rng.gen::<f64>() * e.x, rng.gen::<f64>() * e.y, rng.gen::<f64>() * e.z);
                            let direction = sample_directions(1, &mut rng)[0];
                            let p = OrientedPoint::new(position, direction);
                            FieldSample {
                                position,
                                direction,
                                target: oracle_value(&bvh, &p),
                            }
                        })
                        .collect::<Vec<_>>()
                })
                .collect::<Vec<_>>()
                .concat()
        }
        Strategy::Pov => pov_cameras(mesh, config.film)
            .par_iter()
            .map(|cam| {
                let mut out = Vec::with_capacity(cam.width * cam.height);
                for py in 0..cam.height {
                    for px in 0..cam.width {
                        let p = cam.primary_ray(px, py, (0.5, 0.5));
                        out.push(FieldSample {
                            position: p.position,
                            direction: p.direction,
                            target: oracle_value(&bvh, &p),
                        });
                    }
                }
                out
            })
            .collect::<Vec<_>>()
            .concat(),
    };
    let hits = samples.iter().filter(|s| s.target.is_hit()).count();
    log::info!(
        "{} dataset: {} samples ({} hits, {} misses)",
        config.strategy,
        samples.len(),
        hits,
        samples.len() - hits
    );
    Ok(samples)
}
