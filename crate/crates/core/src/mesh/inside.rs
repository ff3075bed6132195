//! Odd-even point classification.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Ray, RayQuery, Vec3};
use crate::util::random_unit;

/// Crossings closer than this (in `t`, or to a triangle edge in barycentric
/// units) make a parity ray ambiguous.
const GRAZING_EPSILON: f64 = 1e-7;
const MAX_ATTEMPTS: usize = 8;

/// Parity of one ray, or `None` if the ray grazes an edge or passes through
/// two crossings at (nearly) the same distance.
pub fn is_inside_with_direction<Q: RayQuery + ?Sized>(
    query: &Q,
    point: &Vec3,
    direction: &Vec3,
) -> Option<bool> {
    let ray = Ray::new(*point, *direction);
    let mut hits = query.intersect_all(&ray, 0.0);
    if hits.iter().any(|h| h.edge_distance() < GRAZING_EPSILON) {
        return None;
    }
    hits.sort_by(|a, b| a.t.total_cmp(&b.t));
    if hits.windows(2).any(|w| w[1].t - w[0].t < GRAZING_EPSILON) {
        return None;
    }
    Some(hits.len() % 2 == 1)
}

/// True iff `point` is enclosed by the (watertight) surface. Points outside the
/// bounding box are outside. Ambiguous parity rays are re-shot in new random
/// directions; if every attempt is ambiguous the raw parities are put to a
/// majority vote.
pub fn is_inside<Q: RayQuery + ?Sized>(query: &Q, point: &Vec3) -> bool {
    if !query.bounds().contains(point) {
        return false;
    }
    let seed = point
        .iter()
        .fold(0x9e37_79b9_7f4a_7c15u64, |h, c| {
            (h ^ c.to_bits()).wrapping_mul(0x100_0000_01b3)
        });
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut votes = 0usize;
    for attempt in 0..MAX_ATTEMPTS {
        let dir = if attempt == 0 {
            // Irrational-ish fixed direction avoids axis-aligned degeneracies.
            Vec3::new(0.577_215_664_9, 0.267_949_192_4, 0.771_453_636_3)
        } else {
            random_unit(&mut rng)
        };
        match is_inside_with_direction(query, point, &dir) {
            Some(inside) => return inside,
            None => {
                let ray = Ray::new(*point, dir);
                if query.intersect_all(&ray, 0.0).len() % 2 == 1 {
                    votes += 1;
                }
            }
        }
    }
    2 * votes > MAX_ATTEMPTS
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{primitives, Bvh};
    use rand::Rng;

    #[test]
    fn cube_center_is_inside() {
        let cube = primitives::box_mesh(Vec3::repeat(-1.0), Vec3::repeat(1.0), 2);
        let bvh = Bvh::build(&cube);
        assert!(is_inside(&bvh, &Vec3::zeros()));
        assert!(!is_inside(&bvh, &Vec3::new(2.0, 0.0, 0.0)));
    }

    #[test]
    fn parity_matches_analytic_sphere() {
        let sphere = primitives::icosphere(3);
        let bvh = Bvh::build(&sphere);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut checked = 0;
        for _ in 0..1000 {
            let p = Vec3::new(
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
                rng.gen_range(-1.2..1.2),
            );
            let r = p.norm();
            // Skip the thin shell between the inscribed facets and the sphere.
            if (r - 1.0).abs() < 0.01 {
                continue;
            }
            assert_eq!(is_inside(&bvh, &p), r < 1.0, "point {p:?}");
            checked += 1;
        }
        assert!(checked > 900);
    }

    #[test]
    fn parity_is_direction_invariant() {
        let mesh = primitives::blob(20);
        let bvh = Bvh::build(&mesh);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..100 {
            let p = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let reference = is_inside(&bvh, &p);
            for _ in 0..8 {
                let d = random_unit(&mut rng);
                if let Some(v) = is_inside_with_direction(&bvh, &p, &d) {
                    assert_eq!(v, reference);
                }
            }
        }
    }
}
