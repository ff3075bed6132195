//! Small shared helpers for deterministic random streams.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::mesh::Vec3;

/// Uniform direction on the unit sphere (rejection sampling).
pub fn random_unit<R: Rng + ?Sized>(rng: &mut R) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        let n2 = v.norm_squared();
        if n2 > 1e-6 && n2 <= 1.0 {
            return v / n2.sqrt();
        }
    }
}

/// Independent generator for work item `stream` under `seed`. Results do not
/// depend on how work items are scheduled across threads.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Base-2 radical inverse (van der Corput sequence).
pub fn radical_inverse_base2(i: u64) -> f64 {
    (i.reverse_bits() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn van_der_corput_prefix() {
        let v: Vec<f64> = (0..4).map(radical_inverse_base2).collect();
        assert_eq!(v, vec![0.0, 0.5, 0.25, 0.75]);
    }

    #[test]
    fn streams_differ() {
        let a: u64 = stream_rng(1, 0).gen();
        let b: u64 = stream_rng(1, 1).gen();
        assert_ne!(a, b);
        let again: u64 = stream_rng(1, 0).gen();
        assert_eq!(a, again);
    }
}
