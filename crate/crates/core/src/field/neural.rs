//! The trained network as a field backend.
//!
//! The network only learns distances within `δ` of the surface; everything
//! farther is squished to `δ`. Long rays therefore sphere-march: evaluate,
//! and if the prediction is at the miss level step `0.9·δ` and try again.

use super::{rotate, DdfBackend, DdfValue, Direction2, OrientedPoint};
use crate::error::{DdfError, Result};
use crate::mesh::{Aabb, Ray, Vec3};
use crate::nn::{clamp, encode, MlpModel, INPUT_WIDTH};

/// Clamped predictions at or above this fraction of `δ` count as misses.
pub const MISS_FRACTION: f64 = 0.98;
/// Sphere-march step as a fraction of `δ`.
pub const STEP_FRACTION: f64 = 0.9;
const BATCH: usize = 512;

pub struct NeuralField {
    model: MlpModel,
    delta: f64,
    bounds: Aabb,
}

/// Where a march ended: total distance and the last evaluation point.
#[derive(Clone, Copy, Debug)]
struct MarchHit {
    t: f64,
    at: Vec3,
}

impl NeuralField {
    /// Field over `bounds`, using the `δ` stored in the model.
    pub fn new(model: MlpModel, bounds: Aabb) -> Self {
        let delta = model.delta;
        NeuralField { model, delta, bounds }
    }

    /// Field over the normalized-mesh cube `[-1, 1]^3` grown by `δ`.
    pub fn over_unit_cube(model: MlpModel) -> Self {
        let bounds = Aabb::new(Vec3::repeat(-1.0), Vec3::repeat(1.0)).padded(model.delta);
        Self::new(model, bounds)
    }

    pub fn model(&self) -> &MlpModel {
        &self.model
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn interpret(&self, raw: f64) -> DdfValue {
        let y = clamp(raw, self.delta);
        if !(y < MISS_FRACTION * self.delta) {
            DdfValue::Miss
        } else {
            DdfValue::Hit(y.max(0.0))
        }
    }

    /// Lockstep sphere march of many rays; one batched network call per
    /// step over the rays still marching.
    fn march_many(&self, points: &[OrientedPoint]) -> Vec<Option<MarchHit>> {
        let step = STEP_FRACTION * self.delta;
        let mut result = vec![None; points.len()];
        // (index, current t, exit t, direction)
        let mut active: Vec<(usize, f64, f64, Vec3)> = Vec::with_capacity(points.len());
        for (i, p) in points.iter().enumerate() {
            let d = p.direction_vector();
            let ray = Ray::new(p.position, d);
            if let Some((t0, t1)) = self.bounds.ray_interval(&ray, 0.0, f64::INFINITY) {
                active.push((i, t0, t1, d));
            }
        }
        let mut inputs = Vec::with_capacity(active.len().min(BATCH) * INPUT_WIDTH);
        while !active.is_empty() {
            let mut next = Vec::with_capacity(active.len());
            for chunk in active.chunks(BATCH) {
                inputs.clear();
                for &(i, t, _, d) in chunk {
                    inputs.extend_from_slice(&encode(&(points[i].position + d * t), &points[i].direction));
                }
                let raw = self.model.predict_batch(&inputs);
                for (&(i, t, t1, d), &r) in chunk.iter().zip(&raw) {
                    match self.interpret(r) {
                        DdfValue::Hit(y) => {
                            result[i] = Some(MarchHit {
                                t: t + y,
                                at: points[i].position + d * t,
                            })
                        }
                        DdfValue::Miss => {
                            if t + step <= t1 {
                                next.push((i, t + step, t1, d));
                            }
                        }
                    }
                }
            }
            active = next;
        }
        result
    }

    /// Unit normal from the network's spatial gradient at `x`, oriented so
    /// that `n · θ < 0`.
    pub fn normal_at(&self, x: &Vec3, d: &Direction2) -> Result<Vec3> {
        let g = self.model.input_gradient(x, d);
        let grad = Vec3::new(g[0], g[1], g[2]);
        self.orient(grad, &super::dir_to_vec(d))
    }

    fn orient(&self, grad: Vec3, view: &Vec3) -> Result<Vec3> {
        let norm = grad.norm();
        if !(norm >= 1e-12) {
            return Err(DdfError::DegenerateGradient(norm));
        }
        let n = grad / norm;
        let s = n.dot(view);
        if s < 0.0 {
            Ok(n)
        } else if s > 0.0 {
            Ok(-n)
        } else {
            // Gradient orthogonal to the view: no sign satisfies the rule.
            Err(DdfError::DegenerateGradient(norm))
        }
    }

    /// Distances and normals for many rays at once.
    pub fn hits_with_normals(&self, points: &[OrientedPoint]) -> Vec<Option<(f64, Result<Vec3>)>> {
        let marches = self.march_many(points);
        let hit_idx: Vec<usize> = (0..points.len()).filter(|&i| marches[i].is_some()).collect();
        let mut out: Vec<Option<(f64, Result<Vec3>)>> = (0..points.len()).map(|_| None).collect();
        for chunk in hit_idx.chunks(BATCH) {
            let mut inputs = Vec::with_capacity(chunk.len() * INPUT_WIDTH);
            for &i in chunk {
                inputs.extend_from_slice(&encode(&marches[i].unwrap().at, &points[i].direction));
            }
            let (_, grads) = self.model.predict_with_gradient(&inputs);
            for (&i, g) in chunk.iter().zip(grads) {
                let t = marches[i].unwrap().t;
                out[i] = Some((t, self.orient(g, &points[i].direction_vector())));
            }
        }
        out
    }

    /// Diagnostic for the gradient consistency identity using the network's
    /// own input gradients: change of φ predicted from the angle inputs
    /// under the rotation `omega`, against `φ · ∂ₓφ · (ω × θ)`.
    pub fn gradient_consistency(&self, p: &OrientedPoint, omega: &Vec3) -> Option<f64> {
        let phi = self.local_query(p).t()?;
        let d = p.direction_vector();
        let rotated = Direction2::from_vector(&rotate(&d, omega));
        let mut dt0 = rotated.theta0 - p.direction.theta0;
        if dt0 > std::f64::consts::PI {
            dt0 -= std::f64::consts::TAU;
        } else if dt0 < -std::f64::consts::PI {
            dt0 += std::f64::consts::TAU;
        }
        let dt1 = rotated.theta1 - p.direction.theta1;
        let g = self.model.input_gradient(&p.position, &p.direction);
        // Chain through the angle encoding (θ0/π − 1, 2θ1/π − 1).
        let lhs = g[3] / std::f64::consts::PI * dt0 + g[4] * 2.0 / std::f64::consts::PI * dt1;
        let rhs = phi * Vec3::new(g[0], g[1], g[2]).dot(&omega.cross(&d));
        Some((lhs - rhs).abs())
    }
}

impl DdfBackend for NeuralField {
    fn name(&self) -> &str {
        "neural"
    }

    fn bounds(&self) -> Aabb {
        self.bounds
    }

    fn query(&self, p: &OrientedPoint) -> DdfValue {
        self.query_many(std::slice::from_ref(p))[0]
    }

    fn query_many(&self, points: &[OrientedPoint]) -> Vec<DdfValue> {
        self.march_many(points)
            .into_iter()
            .map(|m| match m {
                Some(h) => DdfValue::Hit(h.t),
                None => DdfValue::Miss,
            })
            .collect()
    }

    fn normal(&self, p: &OrientedPoint) -> Result<Vec3> {
        match self.hit_with_normal(p) {
            Some((_, n)) => n,
            None => Err(DdfError::NoSurface),
        }
    }

    fn hit_with_normal(&self, p: &OrientedPoint) -> Option<(f64, Result<Vec3>)> {
        self.hits_with_normals(std::slice::from_ref(p)).pop().flatten()
    }

    fn hit_with_normal_many(&self, points: &[OrientedPoint]) -> Vec<Option<(f64, Result<Vec3>)>> {
        self.hits_with_normals(points)
    }

    fn local_query(&self, p: &OrientedPoint) -> DdfValue {
        self.local_query_many(std::slice::from_ref(p))[0]
    }

    fn local_query_many(&self, points: &[OrientedPoint]) -> Vec<DdfValue> {
        let mut out = Vec::with_capacity(points.len());
        let mut inputs = Vec::with_capacity(BATCH.min(points.len()) * INPUT_WIDTH);
        for chunk in points.chunks(BATCH) {
            inputs.clear();
            for p in chunk {
                inputs.extend_from_slice(&encode(&p.position, &p.direction));
            }
            out.extend(self.model.predict_batch(&inputs).into_iter().map(|r| self.interpret(r)));
        }
        out
    }

    /// Secondary rays leave the surface by a fraction of `δ`, since the
    /// prediction near a surface is only accurate to about that scale.
    fn surface_offset(&self) -> f64 {
        0.05 * self.delta
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::check_eikonal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// A network whose output is exactly `w · input + b`.
    fn linear(w: [f64; 5], b: f64, delta: f64) -> MlpModel {
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        let mut params = w.to_vec();
        params.push(norm);
        params.push(b);
        MlpModel::from_params(vec![5, 1], params, 0.0, delta).unwrap()
    }

    #[test]
    fn planar_field_marches_to_the_plane() {
        // φ(x, θ) = z along θ = −z for points above z = 0: w = (0,0,1,0,0).
        let field = NeuralField::new(linear([0.0, 0.0, 1.0, 0.0, 0.0], 0.0, 0.1), Aabb::new(Vec3::repeat(-1.0), Vec3::repeat(1.0)));
        let down = OrientedPoint::from_vector(Vec3::new(0.2, 0.1, 0.75), &-Vec3::z());
        let t = field.query(&down).t().unwrap();
        // The march stops somewhere inside the band; stepped distance plus
        // the prediction there is the full height.
        assert!((t - 0.75).abs() < 1e-12, "{t}");
        let n = field.normal(&down).unwrap();
        assert!((n - Vec3::z()).norm() < 1e-12);
        assert!(n.dot(&down.direction_vector()) < 0.0);
    }

    #[test]
    fn far_predictions_are_misses() {
        let field = NeuralField::over_unit_cube(linear([0.0, 0.0, 0.0, 0.0, 0.0001], 5.0, 0.1));
        let p = OrientedPoint::from_vector(Vec3::zeros(), &Vec3::x());
        assert_eq!(field.local_query(&p), DdfValue::Miss);
        assert_eq!(field.query(&p), DdfValue::Miss);
        assert!(matches!(field.normal(&p), Err(DdfError::NoSurface)));
    }

    #[test]
    fn constant_in_band_has_degenerate_gradient() {
        let mut params = vec![0.0; 5];
        params[0] = 1.0;
        params.push(0.0); // g = 0 so W = 0
        params.push(0.01);
        let model = MlpModel::from_params(vec![5, 1], params, 0.0, 0.1).unwrap();
        let field = NeuralField::over_unit_cube(model);
        let p = OrientedPoint::from_vector(Vec3::zeros(), &Vec3::x());
        assert!(matches!(field.normal(&p), Err(DdfError::DegenerateGradient(_))));
    }

    #[test]
    fn batched_queries_match_single() {
        let mut r = ChaCha8Rng::seed_from_u64(3);
        let model = MlpModel::new(&[16, 16], 0.0, 0.3, &mut r);
        let field = NeuralField::over_unit_cube(model);
        let points: Vec<OrientedPoint> = (0..600)
            .map(|_| {
                OrientedPoint::new(
                    Vec3::new(r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5), r.gen_range(-1.5..1.5)),
                    Direction2::new(r.gen_range(0.0..6.28), r.gen_range(0.0..3.14)),
                )
            })
            .collect();
        let many = field.query_many(&points);
        for (p, v) in points.iter().zip(&many) {
            assert_eq!(field.query(p), *v);
            assert_eq!(field.visibility(p), v.is_hit());
        }
    }

    #[test]
    fn normals_match_finite_differences_of_the_network() {
        let mut r = ChaCha8Rng::seed_from_u64(5);
        let model = MlpModel::new(&[16, 16], 0.0, 0.5, &mut r);
        let field = NeuralField::over_unit_cube(model);
        let h = 1e-4;
        let mut checked = 0;
        while checked < 100 {
            let x = Vec3::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0));
            let d = Direction2::new(r.gen_range(0.0..6.28), r.gen_range(0.0..3.14));
            let pre = field.model().pre_activations(&encode(&x, &d));
            if pre[..pre.len() - 1].iter().flatten().any(|z| z.abs() < 1e-3) {
                continue;
            }
            let Ok(n) = field.normal_at(&x, &d) else { continue };
            let f = |y: Vec3| field.model().predict(&y, &d);
            let fd = Vec3::new(
                f(x + Vec3::x() * h) - f(x - Vec3::x() * h),
                f(x + Vec3::y() * h) - f(x - Vec3::y() * h),
                f(x + Vec3::z() * h) - f(x - Vec3::z() * h),
            ) / (2.0 * h);
            let fd_n = if fd.dot(&d.to_vector()) < 0.0 { fd.normalize() } else { -fd.normalize() };
            let angle = n.dot(&fd_n).clamp(-1.0, 1.0).acos().to_degrees();
            assert!(angle < 0.5, "angle {angle}");
            assert!((n.norm() - 1.0).abs() < 1e-9);
            checked += 1;
        }
    }

    #[test]
    fn diagnostics_run_on_neural_fields() {
        let field = NeuralField::new(linear([0.0, 0.0, 1.0, 0.0, 0.0], 0.0, 0.1), Aabb::new(Vec3::repeat(-1.0), Vec3::repeat(1.0)));
        let p = OrientedPoint::from_vector(Vec3::new(0.0, 0.0, 0.5), &-Vec3::z());
        assert!(check_eikonal(&field, &p, 0.2).unwrap() < 1e-12);
        let q = OrientedPoint::from_vector(Vec3::new(0.0, 0.0, 0.05), &-Vec3::z());
        assert_eq!(field.gradient_consistency(&q, &Vec3::zeros()), Some(0.0));
    }
}
