//! Images of a field: depth, normal map, Lambert shading and a diffuse path
//! tracer, all driven purely through [`DdfBackend`] queries.
//!
//! Rows are rendered in parallel. Each row is traced as a wavefront (all
//! rays of the row per backend call) so batched backends stay efficient,
//! and each pixel draws from its own random stream.

mod camera;
mod image;

pub use camera::Camera;
pub use image::Framebuffer;

use std::fmt;
use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{DdfError, Result};
use crate::field::{perpendicular_frame, DdfBackend, OrientedPoint};
use crate::mesh::Vec3;
use crate::util::stream_rng;

/// Depth value stored for pixels whose ray misses.
pub const DEPTH_MISS: f64 = -1.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RenderMode {
    Depth,
    Normal,
    Shaded,
    Path,
}

impl fmt::Display for RenderMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RenderMode::Depth => "depth",
            RenderMode::Normal => "normal",
            RenderMode::Shaded => "shaded",
            RenderMode::Path => "path",
        })
    }
}

impl FromStr for RenderMode {
    type Err = DdfError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "depth" => Ok(RenderMode::Depth),
            "normal" => Ok(RenderMode::Normal),
            "shaded" => Ok(RenderMode::Shaded),
            "path" => Ok(RenderMode::Path),
            other => Err(DdfError::InvalidArgument(format!("unknown render mode '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Light {
    /// Unit direction pointing toward the light.
    Directional(Vec3),
    /// Uniform sky of [`RenderConfig::environment`] radiance, with
    /// visibility estimated from `spp` shadow rays.
    Environment,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RenderConfig {
    pub mode: RenderMode,
    pub spp: usize,
    /// Surface interactions per path.
    pub bounces: usize,
    pub background: [f64; 3],
    pub light: Light,
    pub albedo: f64,
    /// Environment radiance seen by rays that escape.
    pub environment: f64,
    /// Jitter primary path-tracing rays within the pixel.
    pub jitter: bool,
    pub seed: u64,
}

impl Default for RenderConfig {
    fn default() -> Self {
        RenderConfig {
            mode: RenderMode::Depth,
            spp: 16,
            bounces: 3,
            background: [0.0; 3],
            light: Light::Directional(Vec3::new(0.4, 0.8, 0.45).normalize()),
            albedo: 0.8,
            environment: 1.0,
            jitter: true,
            seed: 0,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<()> {
        if self.spp == 0 {
            return Err(DdfError::InvalidArgument("spp must be at least 1".into()));
        }
        if self.mode == RenderMode::Path && self.bounces == 0 {
            return Err(DdfError::InvalidArgument("path tracing needs at least one bounce".into()));
        }
        if let Light::Directional(l) = self.light {
            if (l.norm() - 1.0).abs() > 1e-9 {
                return Err(DdfError::InvalidArgument("light direction must be unit length".into()));
            }
        }
        Ok(())
    }
}

/// Checks the sign rule on a normal returned during rendering and falls
/// back to facing the viewer when the backend could not produce one.
fn checked_normal(n: Result<Vec3>, view: &Vec3) -> Vec3 {
    match n {
        Ok(n) => {
            assert!(n.dot(view) < 0.0, "normal {n:?} does not face the ray {view:?}");
            n
        }
        Err(e) => {
            log::debug!("normal unavailable ({e}); facing the viewer instead");
            -view
        }
    }
}

fn pixel_rng(seed: u64, camera: &Camera, px: usize, py: usize) -> ChaCha8Rng {
    stream_rng(seed, (py * camera.width + px) as u64)
}

/// Cosine-weighted direction on the hemisphere around `n`.
pub fn cosine_hemisphere<R: Rng + ?Sized>(n: &Vec3, rng: &mut R) -> Vec3 {
    let (u, v) = perpendicular_frame(n);
    let r1: f64 = rng.gen();
    let r2: f64 = rng.gen();
    let phi = std::f64::consts::TAU * r1;
    let r = r2.sqrt();
    (u * (r * phi.cos()) + v * (r * phi.sin()) + n * (1.0 - r2).max(0.0).sqrt()).normalize()
}

fn render_rows<F>(camera: &Camera, channels: usize, row: F) -> Framebuffer
where
    F: Fn(usize) -> Vec<(Vec<f64>, bool)> + Sync,
{
    let rows: Vec<Vec<(Vec<f64>, bool)>> = (0..camera.height).into_par_iter().map(&row).collect();
    let mut fb = Framebuffer::new(camera.width, camera.height, channels);
    for (py, r) in rows.into_iter().enumerate() {
        for (px, (value, hit)) in r.into_iter().enumerate() {
            fb.set(px, py, &value);
            fb.hit[py * camera.width + px] = hit;
        }
    }
    fb
}

fn center_rays(camera: &Camera, py: usize) -> Vec<OrientedPoint> {
    (0..camera.width).map(|px| camera.primary_ray(px, py, (0.5, 0.5))).collect()
}

/// Per-pixel `t` (or [`DEPTH_MISS`]).
pub fn render_depth<B: DdfBackend + ?Sized>(backend: &B, camera: &Camera, _config: &RenderConfig) -> Framebuffer {
    render_rows(camera, 1, |py| {
        backend
            .query_many(&center_rays(camera, py))
            .into_iter()
            .map(|v| match v.t() {
                Some(t) => (vec![t], true),
                None => (vec![DEPTH_MISS], false),
            })
            .collect()
    })
}

/// Normals mapped to `(n + 1) / 2`.
pub fn render_normal<B: DdfBackend + ?Sized>(backend: &B, camera: &Camera, config: &RenderConfig) -> Framebuffer {
    render_rows(camera, 3, |py| {
        let rays = center_rays(camera, py);
        backend
            .hit_with_normal_many(&rays)
            .into_iter()
            .zip(&rays)
            .map(|(h, ray)| match h {
                Some((_, n)) => {
                    let n = checked_normal(n, &ray.direction_vector());
                    (vec![(n.x + 1.0) / 2.0, (n.y + 1.0) / 2.0, (n.z + 1.0) / 2.0], true)
                }
                None => (config.background.to_vec(), false),
            })
            .collect()
    })
}

/// Lambertian direct lighting. Directional light: `albedo · max(0, n·l)`.
/// Environment light: `albedo · L ·` (fraction of `spp` cosine-distributed
/// shadow rays that escape).
pub fn render_shaded<B: DdfBackend + ?Sized>(backend: &B, camera: &Camera, config: &RenderConfig) -> Framebuffer {
    render_rows(camera, 3, |py| {
        let rays = center_rays(camera, py);
        let hits = backend.hit_with_normal_many(&rays);
        let mut values: Vec<(Vec<f64>, bool)> = vec![(config.background.to_vec(), false); rays.len()];
        let mut shadow = Vec::new();
        let mut owners = Vec::new();
        for (px, (h, ray)) in hits.into_iter().zip(&rays).enumerate() {
            let Some((t, n)) = h else { continue };
            let view = ray.direction_vector();
            let n = checked_normal(n, &view);
            match config.light {
                Light::Directional(l) => {
                    let c = config.albedo * n.dot(&l).max(0.0);
                    values[px] = (vec![c; 3], true);
                }
                Light::Environment => {
                    let mut rng = pixel_rng(config.seed, camera, px, py);
                    let origin = ray.advance(t) + n * backend.surface_offset();
                    for _ in 0..config.spp {
                        shadow.push(OrientedPoint::from_vector(origin, &cosine_hemisphere(&n, &mut rng)));
                        owners.push(px);
                    }
                    values[px] = (vec![0.0; 3], true);
                }
            }
        }
        if !shadow.is_empty() {
            let scale = config.albedo * config.environment / config.spp as f64;
            for (v, &px) in backend.query_many(&shadow).iter().zip(&owners) {
                if !v.is_hit() {
                    for c in values[px].0.iter_mut() {
                        *c += scale;
                    }
                }
            }
        }
        values
    })
}

struct PathState {
    px: usize,
    ray: OrientedPoint,
    throughput: f64,
}

/// Diffuse path tracer: up to `bounces` surface interactions per path with
/// cosine-weighted continuation; escaping rays pick up the environment.
pub fn render_path<B: DdfBackend + ?Sized>(backend: &B, camera: &Camera, config: &RenderConfig) -> Framebuffer {
    render_rows(camera, 3, |py| {
        let mut rngs: Vec<ChaCha8Rng> = (0..camera.width).map(|px| pixel_rng(config.seed, camera, px, py)).collect();
        let mut radiance = vec![0.0; camera.width];
        let mut primary_hit = vec![false; camera.width];
        let mut paths: Vec<PathState> = Vec::with_capacity(camera.width * config.spp);
        for (px, rng) in rngs.iter_mut().enumerate() {
            for _ in 0..config.spp {
                let jitter = if config.jitter { (rng.gen::<f64>(), rng.gen::<f64>()) } else { (0.5, 0.5) };
                paths.push(PathState {
                    px,
                    ray: camera.primary_ray(px, py, jitter),
                    throughput: 1.0,
                });
            }
        }
        let mut depth = 0;
        while !paths.is_empty() {
            let rays: Vec<OrientedPoint> = paths.iter().map(|p| p.ray).collect();
            let hits = backend.hit_with_normal_many(&rays);
            let mut next = Vec::with_capacity(paths.len());
            for (mut path, h) in paths.into_iter().zip(hits) {
                match h {
                    None => radiance[path.px] += path.throughput * config.environment,
                    Some((t, n)) => {
                        if depth == 0 {
                            primary_hit[path.px] = true;
                        }
                        if depth == config.bounces {
                            continue;
                        }
                        let view = path.ray.direction_vector();
                        let n = checked_normal(n, &view);
                        let origin = path.ray.advance(t) + n * backend.surface_offset();
                        let dir = cosine_hemisphere(&n, &mut rngs[path.px]);
                        path.throughput *= config.albedo;
                        path.ray = OrientedPoint::from_vector(origin, &dir);
                        next.push(path);
                    }
                }
            }
            paths = next;
            depth += 1;
        }
        radiance
            .into_iter()
            .zip(primary_hit)
            .map(|(r, hit)| (vec![r / config.spp as f64; 3], hit))
            .collect()
    })
}

/// Renders in the configured mode.
pub fn render<B: DdfBackend + ?Sized>(backend: &B, camera: &Camera, config: &RenderConfig) -> Result<Framebuffer> {
    config.validate()?;
    Ok(match config.mode {
        RenderMode::Depth => render_depth(backend, camera, config),
        RenderMode::Normal => render_normal(backend, camera, config),
        RenderMode::Shaded => render_shaded(backend, camera, config),
        RenderMode::Path => render_path(backend, camera, config),
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BenchRow {
    pub backend: String,
    pub frame: usize,
    pub milliseconds: f64,
    /// First frame of a backend (includes any warm-up cost).
    pub warmup: bool,
}

/// Renders `frames` frames per backend and times each one.
pub fn bench(
    backends: &[&dyn DdfBackend],
    camera: &Camera,
    config: &RenderConfig,
    frames: usize,
) -> Result<Vec<BenchRow>> {
    if frames < 2 {
        return Err(DdfError::InvalidArgument("bench needs at least 2 frames".into()));
    }
    config.validate()?;
    let mut rows = Vec::with_capacity(backends.len() * frames);
    for backend in backends {
        for frame in 0..frames {
            let start = Instant::now();
            render(*backend, camera, config)?;
            rows.push(BenchRow {
                backend: backend.name().to_string(),
                frame,
                milliseconds: start.elapsed().as_secs_f64() * 1e3,
                warmup: frame == 0,
            });
        }
    }
    Ok(rows)
}

pub fn write_bench_csv(rows: &[BenchRow], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(out, "backend,frame,milliseconds,warmup").unwrap();
    for r in rows {
        writeln!(out, "{},{},{:.3},{}", r.backend, r.frame, r.milliseconds, r.warmup).unwrap();
    }
    fs::write(path, out).map_err(|e| DdfError::io(path, e))
}

/// Mean first-frame and later-frame times per backend, in input order.
pub fn summarize_bench(rows: &[BenchRow]) -> Vec<(String, f64, f64)> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.backend.as_str()) {
            names.push(&r.backend);
        }
    }
    names
        .into_iter()
        .map(|name| {
            let mine: Vec<&BenchRow> = rows.iter().filter(|r| r.backend == name).collect();
            let first = mine.iter().filter(|r| r.warmup).map(|r| r.milliseconds).sum::<f64>();
            let rest: Vec<f64> = mine.iter().filter(|r| !r.warmup).map(|r| r.milliseconds).collect();
            let later = rest.iter().sum::<f64>() / rest.len().max(1) as f64;
            (name.to_string(), first, later)
        })
        .collect()
}
