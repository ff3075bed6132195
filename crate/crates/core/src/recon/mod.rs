//! Field to mesh: sample the unsigned distance on a grid, then polygonize a
//! thin level set with marching cubes.

mod tables;

use std::collections::HashMap;

use rayon::prelude::*;

use crate::field::{udf, udf_sampled_many, DdfBackend, DdfValue};
use crate::mesh::{Aabb, TriangleMesh, Vec3};
use tables::TRI_TABLE;

/// Values on the vertices of a regular grid; `res[a]` vertices along axis
/// `a`. Misses are stored as `+∞`.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarGrid {
    pub bbox: Aabb,
    pub res: [usize; 3],
    pub values: Vec<f64>,
}

impl ScalarGrid {
    /// Samples `f` at every vertex (in parallel).
    pub fn from_fn<F>(bbox: Aabb, res: [usize; 3], f: F) -> Self
    where
        F: Fn(Vec3) -> f64 + Sync,
    {
        let mut grid = ScalarGrid {
            bbox,
            res,
            values: Vec::new(),
        };
        let n = res[0] * res[1] * res[2];
        grid.values = (0..n).into_par_iter().map(|i| f(grid.position_of(i))).collect();
        grid
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn spacing(&self) -> Vec3 {
        let e = self.bbox.extent();
        Vec3::new(
            e.x / (self.res[0] - 1) as f64,
            e.y / (self.res[1] - 1) as f64,
            e.z / (self.res[2] - 1) as f64,
        )
    }

    /// Largest cell edge.
    pub fn voxel_size(&self) -> f64 {
        self.spacing().max()
    }

    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.res[0] * (j + self.res[1] * k)
    }

    pub fn position(&self, i: usize, j: usize, k: usize) -> Vec3 {
        let s = self.spacing();
        self.bbox.min + Vec3::new(i as f64 * s.x, j as f64 * s.y, k as f64 * s.z)
    }

    pub fn position_of(&self, index: usize) -> Vec3 {
        let i = index % self.res[0];
        let j = (index / self.res[0]) % self.res[1];
        let k = index / (self.res[0] * self.res[1]);
        self.position(i, j, k)
    }

    pub fn value(&self, i: usize, j: usize, k: usize) -> f64 {
        self.values[self.index(i, j, k)]
    }

    /// Trilinear interpolation at `p` (clamped to the grid).
    pub fn sample_trilinear(&self, p: &Vec3) -> f64 {
        let s = self.spacing();
        let rel = (p - self.bbox.min).component_div(&s);
        let mut base = [0usize; 3];
        let mut frac = [0.0; 3];
        for a in 0..3 {
            let x = rel[a].clamp(0.0, (self.res[a] - 1) as f64);
            let b = (x.floor() as usize).min(self.res[a] - 2);
            base[a] = b;
            frac[a] = x - b as f64;
        }
        let mut acc = 0.0;
        for c in 0..8 {
            let (di, dj, dk) = (c & 1, (c >> 1) & 1, (c >> 2) & 1);
            let w = (if di == 1 { frac[0] } else { 1.0 - frac[0] })
                * (if dj == 1 { frac[1] } else { 1.0 - frac[1] })
                * (if dk == 1 { frac[2] } else { 1.0 - frac[2] });
            if w != 0.0 {
                acc += w * self.value(base[0] + di, base[1] + dj, base[2] + dk);
            }
        }
        acc
    }
}

/// Grid box for a backend: its bounds grown by 5% of the longest side so
/// surfaces touching the bounds still close up.
pub fn grid_bounds(bounds: &Aabb) -> Aabb {
    bounds.padded(0.05 * bounds.extent().max())
}

/// UDF on a `resolution^3` grid over [`grid_bounds`] of the backend.
pub fn udf_grid<B: DdfBackend + ?Sized>(backend: &B, resolution: usize, n_dirs: usize) -> ScalarGrid {
    udf_grid_in(backend, grid_bounds(&backend.bounds()), resolution, n_dirs)
}

/// UDF on a grid over an explicit box. Backends with an exact distance use
/// it; all others go through the sampled minimum over directions.
pub fn udf_grid_in<B: DdfBackend + ?Sized>(
    backend: &B,
    bbox: Aabb,
    resolution: usize,
    n_dirs: usize,
) -> ScalarGrid {
    let res = [resolution.max(2); 3];
    let mut grid = ScalarGrid {
        bbox,
        res,
        values: Vec::new(),
    };
    let positions: Vec<Vec3> = (0..res[0] * res[1] * res[2]).map(|i| grid.position_of(i)).collect();
    let values: Vec<DdfValue> = if backend.exact_udf(&positions[0]).is_some() {
        positions.par_iter().map(|x| udf(backend, x, n_dirs)).collect()
    } else {
        udf_sampled_many(backend, &positions, n_dirs, f64::INFINITY)
    };
    grid.values = values.iter().map(|v| v.or_infinity()).collect();
    grid
}

/// `max(0.5 · voxel size, 0.01)`.
pub fn default_iso(grid: &ScalarGrid) -> f64 {
    (0.5 * grid.voxel_size()).max(0.01)
}

/// Grid corner offsets and edge endpoints in the table's convention.
const CORNERS: [[usize; 3]; 8] = [
    [0, 0, 0],
    [1, 0, 0],
    [1, 1, 0],
    [0, 1, 0],
    [0, 0, 1],
    [1, 0, 1],
    [1, 1, 1],
    [0, 1, 1],
];
const EDGES: [[usize; 2]; 12] = [
    [0, 1],
    [1, 2],
    [2, 3],
    [3, 0],
    [4, 5],
    [5, 6],
    [6, 7],
    [7, 4],
    [0, 4],
    [1, 5],
    [2, 6],
    [3, 7],
];

/// Polygonizes the level set `value = iso`. Corners below `iso` count as
/// inside; triangles are wound so their normals point toward larger values.
/// Infinite (miss) values are treated as the largest finite value in the
/// grid. An empty level set gives an empty mesh.
pub fn marching_cubes(grid: &ScalarGrid, iso: f64) -> TriangleMesh {
    let finite_max = grid
        .values
        .iter()
        .copied()
        .filter(|v| v.is_finite())
        .fold(iso, f64::max);
    let cap = if finite_max > iso { finite_max } else { iso + 1.0 };
    let value = |i: usize, j: usize, k: usize| {
        let v = grid.value(i, j, k);
        if v.is_finite() {
            v
        } else {
            cap
        }
    };

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<[usize; 3]> = Vec::new();
    // Keyed by (lower grid vertex of the edge, axis).
    let mut edge_vertex: HashMap<(usize, u8), usize> = HashMap::new();
    let [nx, ny, nz] = grid.res;
    if nx < 2 || ny < 2 || nz < 2 {
        return TriangleMesh::new(vertices, faces).expect("empty mesh");
    }

    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let mut vals = [0.0; 8];
                let mut case = 0usize;
                for (c, off) in CORNERS.iter().enumerate() {
                    vals[c] = value(i + off[0], j + off[1], k + off[2]);
                    if vals[c] < iso {
                        case |= 1 << c;
                    }
                }
                if case == 0 || case == 255 {
                    continue;
                }
                let row = &TRI_TABLE[case];
                let mut tri = 0;
                while row[tri] >= 0 {
                    let mut idx = [0usize; 3];
                    for (slot, &e) in idx.iter_mut().zip(&row[tri..tri + 3]) {
                        let [a, b] = EDGES[e as usize];
                        // Order endpoints low to high so a shared edge is
                        // interpolated identically from every cell.
                        let (lo, hi) = if CORNERS[a] <= CORNERS[b] { (a, b) } else { (b, a) };
                        let lo_off = CORNERS[lo];
                        let axis = (0..3).find(|&x| CORNERS[hi][x] != lo_off[x]).unwrap() as u8;
                        let key = (grid.index(i + lo_off[0], j + lo_off[1], k + lo_off[2]), axis);
                        *slot = *edge_vertex.entry(key).or_insert_with(|| {
                            let p0 = grid.position(i + lo_off[0], j + lo_off[1], k + lo_off[2]);
                            let hi_off = CORNERS[hi];
                            let p1 = grid.position(i + hi_off[0], j + hi_off[1], k + hi_off[2]);
                            let (v0, v1) = (vals[lo], vals[hi]);
                            let t = ((iso - v0) / (v1 - v0)).clamp(0.0, 1.0);
                            vertices.push(p0 + (p1 - p0) * t);
                            vertices.len() - 1
                        });
                    }
                    // The table winds triangles toward the inside corners;
                    // flip so normals face increasing values.
                    faces.push([idx[0], idx[2], idx[1]]);
                    tri += 3;
                }
            }
        }
    }
    TriangleMesh::new(vertices, faces).expect("marching cubes produces valid indices")
}

/// UDF grid plus marching cubes at [`default_iso`].
pub fn reconstruct<B: DdfBackend + ?Sized>(
    backend: &B,
    resolution: usize,
    n_dirs: usize,
) -> (ScalarGrid, TriangleMesh) {
    let grid = udf_grid(backend, resolution, n_dirs);
    let mesh = marching_cubes(&grid, default_iso(&grid));
    (grid, mesh)
}
