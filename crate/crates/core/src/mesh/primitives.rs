//! Procedural test meshes.

use std::collections::HashMap;

use super::{Aabb, TriangleMesh, Vec3};
use crate::recon::{marching_cubes, ScalarGrid};

/// Unit-radius icosphere with `subdivisions` rounds of midpoint splitting
/// (20 * 4^s faces). Outward winding.
pub fn icosphere(subdivisions: usize) -> TriangleMesh {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let mut vertices: Vec<Vec3> = [
        (-1.0, phi, 0.0),
        (1.0, phi, 0.0),
        (-1.0, -phi, 0.0),
        (1.0, -phi, 0.0),
        (0.0, -1.0, phi),
        (0.0, 1.0, phi),
        (0.0, -1.0, -phi),
        (0.0, 1.0, -phi),
        (phi, 0.0, -1.0),
        (phi, 0.0, 1.0),
        (-phi, 0.0, -1.0),
        (-phi, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];
    for _ in 0..subdivisions {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut midpoint = |a: usize, b: usize, vertices: &mut Vec<Vec3>| -> usize {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                vertices.push(((vertices[a] + vertices[b]) * 0.5).normalize());
                vertices.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for &[a, b, c] in &faces {
            let ab = midpoint(a, b, &mut vertices);
            let bc = midpoint(b, c, &mut vertices);
            let ca = midpoint(c, a, &mut vertices);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new(vertices, faces).expect("icosphere indices are valid")
}

/// Closed axis-aligned box, each side split into `n x n` quads (two
/// triangles each). Vertices are shared along edges so the result is
/// edge-manifold. Outward winding.
pub fn box_mesh(min: Vec3, max: Vec3, n: usize) -> TriangleMesh {
    let n = n.max(1);
    let mut index: HashMap<[usize; 3], usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::new();
    let mut vertex = |lattice: [usize; 3], vertices: &mut Vec<Vec3>| -> usize {
        *index.entry(lattice).or_insert_with(|| {
            let f = |i: usize| lattice[i] as f64 / n as f64;
            vertices.push(Vec3::new(
                min.x + (max.x - min.x) * f(0),
                min.y + (max.y - min.y) * f(1),
                min.z + (max.z - min.z) * f(2),
            ));
            vertices.len() - 1
        })
    };
    // (fixed axis, side, first in-plane axis, second in-plane axis) chosen so
    // that u x v points along the outward normal.
    let sides = [
        (0, n, 1, 2),
        (0, 0, 2, 1),
        (1, n, 2, 0),
        (1, 0, 0, 2),
        (2, n, 0, 1),
        (2, 0, 1, 0),
    ];
    for &(axis, side, ua, va) in &sides {
        for i in 0..n {
            for j in 0..n {
                let mut corner = |di: usize, dj: usize| {
                    let mut l = [0usize; 3];
                    l[axis] = side;
                    l[ua] = i + di;
                    l[va] = j + dj;
                    vertex(l, &mut vertices)
                };
                let a = corner(0, 0);
                let b = corner(1, 0);
                let c = corner(1, 1);
                let d = corner(0, 1);
                faces.push([a, b, c]);
                faces.push([a, c, d]);
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("box indices are valid")
}

/// A square in the plane `z = 0` spanning `[-half, half]^2`, normal +z.
pub fn plane(half: f64) -> TriangleMesh {
    TriangleMesh::new(
        vec![
            Vec3::new(-half, -half, 0.0),
            Vec3::new(half, -half, 0.0),
            Vec3::new(half, half, 0.0),
            Vec3::new(-half, half, 0.0),
        ],
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .expect("plane indices are valid")
}

fn smooth_min(a: f64, b: f64, k: f64) -> f64 {
    let h = (0.5 + 0.5 * (b - a) / k).clamp(0.0, 1.0);
    b + (a - b) * h - k * h * (1.0 - h)
}

fn ellipsoid(p: Vec3, center: Vec3, radii: Vec3) -> f64 {
    let q = (p - center).component_div(&radii);
    (q.norm() - 1.0) * radii.min()
}

/// Signed distance-like field of a rabbit-shaped blob: body, head, two ears
/// and a tail, smoothly unioned.
pub fn blob_field(p: Vec3) -> f64 {
    let body = ellipsoid(p, Vec3::new(-0.1, -0.25, 0.0), Vec3::new(0.6, 0.45, 0.45));
    let head = ellipsoid(p, Vec3::new(0.45, 0.2, 0.0), Vec3::new(0.3, 0.28, 0.26));
    let ear_l = ellipsoid(p, Vec3::new(0.42, 0.62, 0.1), Vec3::new(0.08, 0.3, 0.06));
    let ear_r = ellipsoid(p, Vec3::new(0.36, 0.6, -0.12), Vec3::new(0.08, 0.28, 0.06));
    let tail = ellipsoid(p, Vec3::new(-0.72, -0.1, 0.0), Vec3::new(0.14, 0.14, 0.14));
    let mut d = smooth_min(body, head, 0.12);
    d = smooth_min(d, ear_l, 0.05);
    d = smooth_min(d, ear_r, 0.05);
    smooth_min(d, tail, 0.06)
}

/// Non-convex closed test mesh ("bunny-class"), polygonized from
/// [`blob_field`] on a `resolution^3` grid.
pub fn blob(resolution: usize) -> TriangleMesh {
    let bbox = Aabb::new(Vec3::new(-1.0, -0.85, -0.6), Vec3::new(1.0, 1.0, 0.6));
    let grid = ScalarGrid::from_fn(bbox, [resolution; 3], blob_field);
    marching_cubes(&grid, 0.0)
}
