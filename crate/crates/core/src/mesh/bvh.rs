//! Bounding volume hierarchy with median splits on the longest axis.

use super::{
    closest_point_on_triangle, intersect_triangle, Aabb, HitRecord, Ray, RayQuery, TriangleMesh,
    Vec3,
};

pub const MAX_LEAF_TRIANGLES: usize = 4;

/// One node of the flattened tree. For leaves `count > 0` and `first` indexes
/// into the triangle order; for interior nodes `count == 0` and the children
/// are `first` and `first + 1`.
#[derive(Clone, Copy, Debug)]
pub struct BvhNode {
    pub bbox: Aabb,
    pub first: u32,
    pub count: u32,
}

impl BvhNode {
    pub fn is_leaf(&self) -> bool {
        self.count > 0
    }
}

#[derive(Clone, Copy, Debug)]
struct PackedTriangle {
    v0: Vec3,
    e1: Vec3,
    e2: Vec3,
}

#[derive(Clone, Debug)]
pub struct Bvh {
    nodes: Vec<BvhNode>,
    /// Permutation of face indices; leaves reference contiguous ranges.
    order: Vec<usize>,
    triangles: Vec<PackedTriangle>,
}

struct BuildRef {
    bbox: Aabb,
    centroid: Vec3,
    face: usize,
}

impl Bvh {
    pub fn build(mesh: &TriangleMesh) -> Bvh {
        let mut refs: Vec<BuildRef> = (0..mesh.faces.len())
            .map(|face| {
                let tri = mesh.triangle(face);
                BuildRef {
                    bbox: Aabb::from_points(&tri),
                    centroid: (tri[0] + tri[1] + tri[2]) / 3.0,
                    face,
                }
            })
            .collect();

        let mut nodes = Vec::with_capacity(2 * refs.len().max(1));
        nodes.push(BvhNode {
            bbox: Aabb::empty(),
            first: 0,
            count: 0,
        });
        if !refs.is_empty() {
            let len = refs.len();
            build_node(&mut nodes, 0, &mut refs, 0, len);
        }

        let order: Vec<usize> = refs.iter().map(|r| r.face).collect();
        let triangles = order
            .iter()
            .map(|&f| {
                let [v0, v1, v2] = mesh.triangle(f);
                PackedTriangle {
                    v0,
                    e1: v1 - v0,
                    e2: v2 - v0,
                }
            })
            .collect();
        Bvh {
            nodes,
            order,
            triangles,
        }
    }

    pub fn nodes(&self) -> &[BvhNode] {
        &self.nodes
    }

    pub fn triangle_order(&self) -> &[usize] {
        &self.order
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[BvhNode], i: usize) -> usize {
            let n = &nodes[i];
            if n.is_leaf() || n.bbox.is_empty() {
                1
            } else {
                let c = n.first as usize;
                1 + go(nodes, c).max(go(nodes, c + 1))
            }
        }
        go(&self.nodes, 0)
    }

    fn leaf_hit(&self, slot: usize, ray: &Ray, t_min: f64, t_max: f64) -> Option<HitRecord> {
        let tri = &self.triangles[slot];
        intersect_triangle(ray, &tri.v0, &tri.e1, &tri.e2, t_min, t_max).map(|(t, u, v)| {
            HitRecord {
                t,
                face: self.order[slot],
                geometric_normal: tri.e1.cross(&tri.e2).normalize(),
                barycentric: (u, v),
            }
        })
    }

    /// Closest point on the surface to `p`: `(distance, face, point)`.
    pub fn closest_point(&self, p: &Vec3) -> Option<(f64, usize, Vec3)> {
        if self.triangles.is_empty() {
            return None;
        }
        let mut best_d2 = f64::INFINITY;
        let mut best: Option<(usize, Vec3)> = None;
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bbox.distance_squared(p) > best_d2 {
                continue;
            }
            if node.is_leaf() {
                let start = node.first as usize;
                for slot in start..start + node.count as usize {
                    let t = &self.triangles[slot];
                    let q = closest_point_on_triangle(p, &t.v0, &(t.v0 + t.e1), &(t.v0 + t.e2));
                    let d2 = (q - p).norm_squared();
                    let face = self.order[slot];
                    if d2 < best_d2 || (d2 == best_d2 && best.map_or(true, |(f, _)| face < f)) {
                        best_d2 = d2;
                        best = Some((face, q));
                    }
                }
            } else {
                let c = node.first as usize;
                let dl = self.nodes[c].bbox.distance_squared(p);
                let dr = self.nodes[c + 1].bbox.distance_squared(p);
                if dl <= dr {
                    stack.push(c + 1);
                    stack.push(c);
                } else {
                    stack.push(c);
                    stack.push(c + 1);
                }
            }
        }
        best.map(|(f, q)| (best_d2.sqrt(), f, q))
    }
}

fn build_node(
    nodes: &mut Vec<BvhNode>,
    index: usize,
    refs: &mut [BuildRef],
    start: usize,
    end: usize,
) {
    let slice = &mut refs[start..end];
    let bbox = slice
        .iter()
        .fold(Aabb::empty(), |acc, r| acc.union(&r.bbox));
    if slice.len() <= MAX_LEAF_TRIANGLES {
        nodes[index] = BvhNode {
            bbox,
            first: start as u32,
            count: slice.len() as u32,
        };
        return;
    }
    let axis = Aabb::from_points(slice.iter().map(|r| &r.centroid)).longest_axis();
    let mid = slice.len() / 2;
    slice.select_nth_unstable_by(mid, |a, b| {
        a.centroid[axis]
            .total_cmp(&b.centroid[axis])
            .then(a.face.cmp(&b.face))
    });

    let left = nodes.len();
    nodes.push(BvhNode {
        bbox: Aabb::empty(),
        first: 0,
        count: 0,
    });
    nodes.push(BvhNode {
        bbox: Aabb::empty(),
        first: 0,
        count: 0,
    });
    nodes[index] = BvhNode {
        bbox,
        first: left as u32,
        count: 0,
    };
    build_node(nodes, left, refs, start, start + mid);
    build_node(nodes, left + 1, refs, start + mid, end);
}

impl RayQuery for Bvh {
    fn intersect(&self, ray: &Ray, t_min: f64, t_max: f64) -> Option<HitRecord> {
        if self.triangles.is_empty() {
            return None;
        }
        let mut best: Option<HitRecord> = None;
        let mut stack: Vec<usize> = Vec::with_capacity(64);
        stack.push(0);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            let limit = best.map_or(t_max, |b| b.t);
            // `<=` keeps equal-t candidates alive for the face-index tie break.
            let Some((near, _)) = node.bbox.ray_interval(ray, t_min, limit) else {
                continue;
            };
            if near > limit {
                continue;
            }
            if node.is_leaf() {
                let start = node.first as usize;
                for slot in start..start + node.count as usize {
                    if let Some(hit) = self.leaf_hit(slot, ray, t_min, limit) {
                        if best.map_or(true, |b| hit.closer_than(&b)) {
                            best = Some(hit);
                        }
                    }
                }
            } else {
                let c = node.first as usize;
                let near_l = self.nodes[c].bbox.ray_interval(ray, t_min, limit);
                let near_r = self.nodes[c + 1].bbox.ray_interval(ray, t_min, limit);
                match (near_l, near_r) {
                    (Some((l, _)), Some((r, _))) => {
                        if l <= r {
                            stack.push(c + 1);
                            stack.push(c);
                        } else {
                            stack.push(c);
                            stack.push(c + 1);
                        }
                    }
                    (Some(_), None) => stack.push(c),
                    (None, Some(_)) => stack.push(c + 1),
                    (None, None) => {}
                }
            }
        }
        best
    }

    fn intersect_all(&self, ray: &Ray, t_min: f64) -> Vec<HitRecord> {
        let mut hits = Vec::new();
        if self.triangles.is_empty() {
            return hits;
        }
        let mut stack = vec![0usize];
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if node.bbox.ray_interval(ray, t_min, f64::INFINITY).is_none() {
                continue;
            }
            if node.is_leaf() {
                let start = node.first as usize;
                for slot in start..start + node.count as usize {
                    if let Some(hit) = self.leaf_hit(slot, ray, t_min, f64::INFINITY) {
                        hits.push(hit);
                    }
                }
            } else {
                stack.push(node.first as usize);
                stack.push(node.first as usize + 1);
            }
        }
        hits
    }

    fn bounds(&self) -> Aabb {
        self.nodes[0].bbox
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_soup(n: usize, seed: u64) -> TriangleMesh {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for i in 0..n {
            let c = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            for _ in 0..3 {
                vertices.push(
                    c + Vec3::new(
                        rng.gen_range(-0.15..0.15),
                        rng.gen_range(-0.15..0.15),
                        rng.gen_range(-0.15..0.15),
                    ),
                );
            }
            faces.push([3 * i, 3 * i + 1, 3 * i + 2]);
        }
        TriangleMesh::new(vertices, faces).unwrap()
    }

    fn random_ray(rng: &mut ChaCha8Rng) -> Ray {
        let o = Vec3::new(
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
            rng.gen_range(-2.0..2.0),
        );
        // Aim at a point inside the soup's box so a fair share of rays hit.
        let target = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        Ray::new(o, target - o)
    }

    #[test]
    fn single_triangle_is_single_leaf() {
        let mesh = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let bvh = Bvh::build(&mesh);
        assert_eq!(bvh.nodes().len(), 1);
        assert!(bvh.nodes()[0].is_leaf());
    }

    #[test]
    fn separated_triangles_nest_boxes() {
        let mut vertices = Vec::new();
        let mut faces = Vec::new();
        for i in 0..8 {
            let x = 3.0 * i as f64;
            vertices.extend([Vec3::new(x, 0.0, 0.0), Vec3::new(x + 1.0, 0.0, 0.0), Vec3::new(x, 1.0, 0.0)]);
            faces.push([3 * i, 3 * i + 1, 3 * i + 2]);
        }
        let mesh = TriangleMesh::new(vertices, faces).unwrap();
        let bvh = Bvh::build(&mesh);
        assert!(bvh.depth() >= 2);
        for n in bvh.nodes() {
            if n.is_leaf() {
                assert!(n.count as usize <= MAX_LEAF_TRIANGLES);
                for slot in n.first..n.first + n.count {
                    let f = bvh.triangle_order()[slot as usize];
                    for v in mesh.triangle(f) {
                        assert!(n.bbox.contains(&v));
                    }
                }
            } else {
                let c = n.first as usize;
                assert!(n.bbox.contains_box(&bvh.nodes()[c].bbox));
                assert!(n.bbox.contains_box(&bvh.nodes()[c + 1].bbox));
            }
        }
    }

    #[test]
    fn bvh_matches_linear_scan_on_random_soup() {
        let mesh = random_soup(500, 7);
        let bvh = Bvh::build(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut hits = 0;
        for _ in 0..1000 {
            let ray = random_ray(&mut rng);
            let a = bvh.intersect(&ray, 0.0, f64::INFINITY);
            let b = mesh.linear().intersect(&ray, 0.0, f64::INFINITY);
            assert_eq!(a, b);
            hits += a.is_some() as usize;
        }
        assert!(hits > 100, "test rays should actually hit something ({hits})");
    }

    #[test]
    fn all_hits_match_linear_scan() {
        let mesh = primitives::icosphere(2);
        let bvh = Bvh::build(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..200 {
            let ray = random_ray(&mut rng);
            let mut a: Vec<usize> = bvh.intersect_all(&ray, 0.0).iter().map(|h| h.face).collect();
            let mut b: Vec<usize> = mesh.linear().intersect_all(&ray, 0.0).iter().map(|h| h.face).collect();
            a.sort();
            b.sort();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn closest_point_matches_brute_force() {
        let mesh = random_soup(200, 5);
        let bvh = Bvh::build(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..200 {
            let p = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
            let brute = (0..mesh.faces.len())
                .map(|f| {
                    let [a, b, c] = mesh.triangle(f);
                    (closest_point_on_triangle(&p, &a, &b, &c) - p).norm()
                })
                .fold(f64::INFINITY, f64::min);
            let (d, _, _) = bvh.closest_point(&p).unwrap();
            assert!((d - brute).abs() < 1e-12);
        }
    }
}
