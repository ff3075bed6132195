//! Point-cloud metrics between a reconstruction and its ground truth:
//! chamfer distance, sided distance and f-score.
//!
//! Nearest neighbours come from a uniform grid of buckets searched in
//! growing shells, which returns exactly the brute-force minimum.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use rand::distributions::{Distribution, WeightedIndex};
use rand::Rng;
use rayon::prelude::*;

use crate::error::{DdfError, Result};
use crate::mesh::{Aabb, TriangleMesh, Vec3};
use crate::sampler::barycentric_point;
use crate::util::stream_rng;

/// Reported chamfer values are multiplied by this.
pub const CHAMFER_REPORT_SCALE: f64 = 1e3;
pub const DEFAULT_TAU: f64 = 0.01;
pub const DEFAULT_EVAL_POINTS: usize = 30_000;

#[derive(Clone, Debug, Default, PartialEq)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
    /// Where the points came from, for reports.
    pub source: Option<String>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        PointCloud { points, source: None }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `n` points on the surface: faces by area, then uniform barycentric.
pub fn sample_surface(mesh: &TriangleMesh, n: usize, seed: u64) -> Result<PointCloud> {
    if mesh.is_empty() {
        return Err(DdfError::EmptyMesh);
    }
    let areas: Vec<f64> = (0..mesh.faces.len()).map(|f| mesh.face_area(f)).collect();
    let pick = WeightedIndex::new(&areas)
        .map_err(|_| DdfError::DegenerateMesh("surface has zero total area".into()))?;
    let mut rng = stream_rng(seed, 0);
    let points = (0..n)
        .map(|_| {
            let face = pick.sample(&mut rng);
            let a = rng.gen::<f64>();
            let b = rng.gen::<f64>();
            barycentric_point(&mesh.triangle(face), a, b)
        })
        .collect();
    Ok(PointCloud { points, source: None })
}

/// Exact nearest-neighbour index over a fixed point set.
pub struct GridIndex<'a> {
    points: &'a [Vec3],
    origin: Vec3,
    cell: f64,
    dims: [usize; 3],
    /// Bucket `c` holds `order[starts[c]..starts[c + 1]]`.
    starts: Vec<usize>,
    order: Vec<usize>,
}

impl<'a> GridIndex<'a> {
    /// About two points per bucket. Panics on an empty set.
    pub fn new(points: &'a [Vec3]) -> Self {
        assert!(!points.is_empty(), "cannot index an empty point set");
        let bbox = Aabb::from_points(points.iter());
        let extent = bbox.extent();
        let volume = extent.x.max(1e-12) * extent.y.max(1e-12) * extent.z.max(1e-12);
        let mut cell = (2.0 * volume / points.len() as f64).cbrt();
        // Flat or tiny sets: never allow more buckets than a few per point.
        cell = cell.max(extent.max() / (4.0 * points.len() as f64).cbrt()).max(1e-12);
        let dims = [0, 1, 2].map(|a| ((extent[a] / cell).floor() as usize + 1).min(1 << 20));
        let mut index = GridIndex {
            points,
            origin: bbox.min,
            cell,
            dims,
            starts: Vec::new(),
            order: Vec::new(),
        };
        let buckets: Vec<usize> = points.iter().map(|p| index.bucket(index.cell_of(p))).collect();
        let n_cells = dims[0] * dims[1] * dims[2];
        let mut starts = vec![0usize; n_cells + 1];
        for &b in &buckets {
            starts[b + 1] += 1;
        }
        for c in 0..n_cells {
            starts[c + 1] += starts[c];
        }
        let mut fill = starts.clone();
        let mut order = vec![0; points.len()];
        for (i, &b) in buckets.iter().enumerate() {
            order[fill[b]] = i;
            fill[b] += 1;
        }
        index.starts = starts;
        index.order = order;
        index
    }

    fn cell_of(&self, p: &Vec3) -> [usize; 3] {
        [0, 1, 2].map(|a| {
            let c = ((p[a] - self.origin[a]) / self.cell).floor();
            if c <= 0.0 {
                0
            } else {
                (c as usize).min(self.dims[a] - 1)
            }
        })
    }

    fn bucket(&self, c: [usize; 3]) -> usize {
        (c[2] * self.dims[1] + c[1]) * self.dims[0] + c[0]
    }

    /// Smallest squared distance from `p` to the set, and the point index.
    pub fn nearest(&self, p: &Vec3) -> (f64, usize) {
        let home = self.cell_of(p);
        let mut best = (f64::INFINITY, usize::MAX);
        let mut r = 0usize;
        loop {
            let lo = home.map(|c| c.saturating_sub(r));
            let hi = [0, 1, 2].map(|a| (home[a] + r).min(self.dims[a] - 1));
            for k in lo[2]..=hi[2] {
                for j in lo[1]..=hi[1] {
                    for i in lo[0]..=hi[0] {
                        let on_shell = [i, j, k]
                            .iter()
                            .zip(home.iter())
                            .any(|(&c, &h)| c.abs_diff(h) == r);
                        if !on_shell {
                            continue;
                        }
                        let b = self.bucket([i, j, k]);
                        for &idx in &self.order[self.starts[b]..self.starts[b + 1]] {
                            let d2 = (self.points[idx] - p).norm_squared();
                            if d2 < best.0 || (d2 == best.0 && idx < best.1) {
                                best = (d2, idx);
                            }
                        }
                    }
                }
            }
            // Anything not yet visited lies beyond one of the explored
            // region's inner faces.
            let mut bound = f64::INFINITY;
            for a in 0..3 {
                if lo[a] > 0 {
                    let face = self.origin[a] + lo[a] as f64 * self.cell;
                    bound = bound.min((p[a] - face).max(0.0));
                }
                if hi[a] + 1 < self.dims[a] {
                    let face = self.origin[a] + (hi[a] + 1) as f64 * self.cell;
                    bound = bound.min((face - p[a]).max(0.0));
                }
            }
            if bound == f64::INFINITY || best.0 <= bound * bound {
                return best;
            }
            r += 1;
        }
    }
}

/// Per-point squared distance from each point of `from` to `to`.
pub fn sided_profile(from: &[Vec3], to: &[Vec3]) -> Vec<f64> {
    let index = GridIndex::new(to);
    from.par_iter().map(|p| index.nearest(p).0).collect()
}

/// Squared distance from `p` to its nearest neighbour in `to`.
pub fn sided_distance(p: &Vec3, to: &[Vec3]) -> f64 {
    GridIndex::new(to).nearest(p).0
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// `w1 · mean_p1 min‖p1 − p2‖² + w2 · mean_p2 min‖p2 − p1‖²`. Panics if
/// either cloud is empty.
pub fn chamfer(p1: &[Vec3], p2: &[Vec3], w1: f64, w2: f64) -> f64 {
    assert!(!p1.is_empty() && !p2.is_empty(), "chamfer needs two non-empty clouds");
    w1 * mean(&sided_profile(p1, p2)) + w2 * mean(&sided_profile(p2, p1))
}

/// Harmonic mean of precision (points of `p1` within Euclidean `tau` of
/// `p2`) and recall (the reverse).
pub fn f_score(p1: &[Vec3], p2: &[Vec3], tau: f64) -> f64 {
    assert!(tau > 0.0, "tau must be positive");
    let tau2 = tau * tau;
    let within = |from: &[Vec3], to: &[Vec3]| {
        sided_profile(from, to).iter().filter(|&&d2| d2 <= tau2).count() as f64 / from.len() as f64
    };
    let precision = within(p1, p2);
    let recall = within(p2, p1);
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct MetricReport {
    /// Raw chamfer (squared distances, unit weights); infinite for an empty
    /// reconstruction.
    pub chamfer: f64,
    pub f_score: f64,
    pub tau: f64,
    pub points: usize,
    pub seed: u64,
    /// Median and 90th percentile of the prediction-to-truth sided distance.
    pub sided_median: f64,
    pub sided_p90: f64,
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return f64::INFINITY;
    }
    let i = ((sorted.len() - 1) as f64 * q).round() as usize;
    sorted[i]
}

/// Samples both meshes and compares the clouds. An empty prediction scores
/// an infinite chamfer and zero f-score.
pub fn evaluate_meshes(pred: &TriangleMesh, gt: &TriangleMesh, points: usize, seed: u64, tau: f64) -> Result<MetricReport> {
    if points == 0 || !(tau > 0.0) {
        return Err(DdfError::InvalidArgument("need at least one point and tau > 0".into()));
    }
    let truth = sample_surface(gt, points, seed)?;
    let predicted = match sample_surface(pred, points, seed.wrapping_add(1)) {
        Ok(p) => p,
        Err(DdfError::EmptyMesh) | Err(DdfError::DegenerateMesh(_)) => {
            log::warn!("reconstruction is empty; reporting infinite chamfer");
            return Ok(MetricReport {
                chamfer: f64::INFINITY,
                f_score: 0.0,
                tau,
                points,
                seed,
                sided_median: f64::INFINITY,
                sided_p90: f64::INFINITY,
            });
        }
        Err(e) => return Err(e),
    };
    let mut profile = sided_profile(&predicted.points, &truth.points);
    let back = sided_profile(&truth.points, &predicted.points);
    let chamfer = mean(&profile) + mean(&back);
    let tau2 = tau * tau;
    let precision = profile.iter().filter(|&&d| d <= tau2).count() as f64 / points as f64;
    let recall = back.iter().filter(|&&d| d <= tau2).count() as f64 / points as f64;
    let f = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    profile.sort_by(f64::total_cmp);
    Ok(MetricReport {
        chamfer,
        f_score: f,
        tau,
        points,
        seed,
        sided_median: percentile(&profile, 0.5),
        sided_p90: percentile(&profile, 0.9),
    })
}

/// `metric,value,parameters` rows; chamfer in units of 10⁻³.
pub fn write_report_csv(report: &MetricReport, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    writeln!(
        out,
        "# chamfer: squared distances, weights 1, {} points per cloud, reported x{}",
        report.points, CHAMFER_REPORT_SCALE
    )
    .unwrap();
    writeln!(out, "metric,value,parameters").unwrap();
    let params = format!("points={};seed={}", report.points, report.seed);
    writeln!(out, "chamfer_x1e3,{:.6},{params}", report.chamfer * CHAMFER_REPORT_SCALE).unwrap();
    writeln!(out, "f_score,{:.6},{params};tau={}", report.f_score, report.tau).unwrap();
    writeln!(out, "sided_median,{:.9},{params};direction=pred_to_gt", report.sided_median).unwrap();
    writeln!(out, "sided_p90,{:.9},{params};direction=pred_to_gt", report.sided_p90).unwrap();
    fs::write(path, out).map_err(|e| DdfError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::primitives;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_sided(from: &[Vec3], to: &[Vec3]) -> Vec<f64> {
        from.iter()
            .map(|p| to.iter().map(|q| (q - p).norm_squared()).fold(f64::INFINITY, f64::min))
            .collect()
    }

    fn brute_chamfer(p1: &[Vec3], p2: &[Vec3]) -> f64 {
        mean(&brute_sided(p1, p2)) + mean(&brute_sided(p2, p1))
    }

    fn cloud(rng: &mut ChaCha8Rng, n: usize, spread: f64) -> Vec<Vec3> {
        (0..n)
            .map(|_| Vec3::new(rng.gen::<f64>(), rng.gen::<f64>() * spread, rng.gen::<f64>()) * 2.0 - Vec3::repeat(1.0))
            .collect()
    }

    #[test]
    fn hand_examples() {
        let a = [Vec3::zeros()];
        let b = [Vec3::x()];
        assert_eq!(chamfer(&a, &b, 1.0, 1.0), 2.0);
        assert_eq!(sided_distance(&Vec3::zeros(), &[Vec3::new(3.0, 4.0, 0.0)]), 25.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let c = cloud(&mut rng, 200, 1.0);
        assert_eq!(chamfer(&c, &c, 1.0, 1.0), 0.0);
        assert_eq!(sided_distance(&c[17], &c), 0.0);
        assert_eq!(f_score(&c, &c, 1e-6), 1.0);
        let far: Vec<Vec3> = c.iter().map(|p| p + Vec3::repeat(10.0)).collect();
        assert_eq!(f_score(&c, &far, 0.5), 0.0);
    }

    #[test]
    fn index_matches_brute_force_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for trial in 0..20 {
            let n1 = rng.gen_range(1..=1000);
            let n2 = rng.gen_range(1..=1000);
            // Some flat clouds exercise degenerate bucket shapes.
            let spread = if trial % 4 == 0 { 0.0 } else { 1.0 };
            let p1 = cloud(&mut rng, n1, spread);
            let p2 = cloud(&mut rng, n2, 1.0);
            assert_eq!(sided_profile(&p1, &p2), brute_sided(&p1, &p2));
            assert_eq!(chamfer(&p1, &p2, 1.0, 1.0), brute_chamfer(&p1, &p2));
        }
    }

    #[test]
    fn queries_far_outside_the_index() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let p2 = cloud(&mut rng, 300, 1.0);
        let queries: Vec<Vec3> = cloud(&mut rng, 100, 1.0).into_iter().map(|p| p * 7.0).collect();
        assert_eq!(sided_profile(&queries, &p2), brute_sided(&queries, &p2));
        let single = [Vec3::new(0.3, 0.3, 0.3)];
        assert_eq!(sided_profile(&queries, &single), brute_sided(&queries, &single));
    }

    #[test]
    fn surface_samples_lie_on_faces() {
        let tri = TriangleMesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y()],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let c = sample_surface(&tri, 500, 2).unwrap();
        for p in &c.points {
            assert!(p.x >= -1e-12 && p.y >= -1e-12 && p.x + p.y <= 1.0 + 1e-12 && p.z == 0.0);
        }
        assert_eq!(c, sample_surface(&tri, 500, 2).unwrap());
    }

    #[test]
    fn face_choice_follows_area() {
        // Areas 1 and 3.
        let mesh = TriangleMesh::new(
            vec![
                Vec3::zeros(),
                Vec3::new(2.0, 0.0, 0.0),
                Vec3::new(0.0, 1.0, 0.0),
                Vec3::new(0.0, 0.0, 5.0),
                Vec3::new(6.0, 0.0, 5.0),
                Vec3::new(0.0, 1.0, 5.0),
            ],
            vec![[0, 1, 2], [3, 4, 5]],
        )
        .unwrap();
        let n = 10_000;
        let c = sample_surface(&mesh, n, 9).unwrap();
        let first = c.points.iter().filter(|p| p.z == 0.0).count() as f64;
        let p = 0.25;
        let sigma = (n as f64 * p * (1.0 - p)).sqrt();
        assert!((first - n as f64 * p).abs() <= 3.0 * sigma, "{first}");
    }

    #[test]
    fn degenerate_meshes_are_rejected() {
        let empty = TriangleMesh::new(vec![], vec![]).unwrap();
        assert!(matches!(sample_surface(&empty, 10, 0), Err(DdfError::EmptyMesh)));
        let flat = TriangleMesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::x() * 2.0], vec![[0, 1, 2]]).unwrap();
        assert!(sample_surface(&flat, 10, 0).is_err());
    }

    #[test]
    fn empty_prediction_scores_infinity() {
        let gt = primitives::icosphere(2);
        let empty = TriangleMesh::new(vec![], vec![]).unwrap();
        let r = evaluate_meshes(&empty, &gt, 100, 0, DEFAULT_TAU).unwrap();
        assert_eq!(r.chamfer, f64::INFINITY);
        assert_eq!(r.f_score, 0.0);
        // Two independent 2000-point samples of the same sphere (area ~4π):
        // nearest-neighbour spacing alone gives a mean squared distance of
        // about 1 / (π · density) ≈ 0.002 per side.
        let same = evaluate_meshes(&gt, &gt, 2000, 0, 0.1).unwrap();
        assert!(same.chamfer < 0.006, "{}", same.chamfer);
        assert!(same.f_score > 0.95, "{}", same.f_score);
    }

    #[test]
    fn report_csv_is_scaled() {
        let report = MetricReport {
            chamfer: 0.0025,
            f_score: 0.5,
            tau: 0.01,
            points: 10,
            seed: 4,
            sided_median: 0.0,
            sided_p90: 0.0,
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.csv");
        write_report_csv(&report, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert!(text.contains("metric,value,parameters\nchamfer_x1e3,2.500000,points=10;seed=4\n"));
        assert!(text.starts_with("# chamfer: squared distances"));
    }

    fn arb_cloud() -> impl Strategy<Value = Vec<Vec3>> {
        proptest::collection::vec((-2.0..2.0f64, -2.0..2.0f64, -2.0..2.0f64), 1..60)
            .prop_map(|v| v.into_iter().map(|(x, y, z)| Vec3::new(x, y, z)).collect())
    }

    proptest! {
        #[test]
        fn chamfer_is_symmetric(a in arb_cloud(), b in arb_cloud()) {
            prop_assert_eq!(chamfer(&a, &b, 1.0, 1.0), chamfer(&b, &a, 1.0, 1.0));
        }

        #[test]
        fn chamfer_scales_quadratically(a in arb_cloud(), b in arb_cloud(), s in 0.1..10.0f64) {
            let base = chamfer(&a, &b, 1.0, 1.0);
            let sa: Vec<Vec3> = a.iter().map(|p| p * s).collect();
            let sb: Vec<Vec3> = b.iter().map(|p| p * s).collect();
            let scaled = chamfer(&sa, &sb, 1.0, 1.0);
            prop_assert!((scaled - s * s * base).abs() <= 1e-9 * (1.0 + s * s * base));
        }

        #[test]
        fn sided_matches_brute(a in arb_cloud(), b in arb_cloud()) {
            prop_assert_eq!(sided_profile(&a, &b), brute_sided(&a, &b));
        }
    }
}
