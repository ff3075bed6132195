//! `DDF1` dataset files.
//!
//! Little-endian. Header: magic `DDF1`, record count `u64`, bounding box of
//! the sample positions as 6 `f64` (min then max). Each record: `x, y, z,
//! theta0, theta1` as `f64`, a flag byte (bit 0 = miss), and the target `t`
//! as `f64` (`+∞` for misses, ignored on read).

use std::fs;
use std::path::Path;

use super::FieldSample;
use crate::error::{DdfError, Result};
use crate::field::{DdfValue, Direction2};
use crate::mesh::{Aabb, Vec3};

pub const DATASET_MAGIC: &[u8; 4] = b"DDF1";
pub const RECORD_BYTES: usize = 5 * 8 + 1 + 8;
const HEADER_BYTES: usize = 4 + 8 + 6 * 8;
const FLAG_MISS: u8 = 1;

pub fn write_dataset(samples: &[FieldSample], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bbox = Aabb::from_points(samples.iter().map(|s| &s.position));
    let mut buf = Vec::with_capacity(HEADER_BYTES + samples.len() * RECORD_BYTES);
    buf.extend_from_slice(DATASET_MAGIC);
    buf.extend_from_slice(&(samples.len() as u64).to_le_bytes());
    for v in bbox.min.iter().chain(bbox.max.iter()) {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    for s in samples {
        for v in [s.position.x, s.position.y, s.position.z, s.direction.theta0, s.direction.theta1] {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let (flags, t) = match s.target {
            DdfValue::Hit(t) => (0u8, t),
            DdfValue::Miss => (FLAG_MISS, f64::INFINITY),
        };
        buf.push(flags);
        buf.extend_from_slice(&t.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| DdfError::io(path, e))
}

fn f64_at(bytes: &[u8], at: usize) -> f64 {
    f64::from_le_bytes(bytes[at..at + 8].try_into().unwrap())
}

/// Reads a dataset; fails without returning anything on a bad header or a
/// size that does not match the record count.
pub fn read_dataset(path: impl AsRef<Path>) -> Result<(Vec<FieldSample>, Aabb)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DdfError::io(path, e))?;
    if bytes.len() < 4 {
        return Err(DdfError::Format(format!("{} is too short for a dataset", path.display())));
    }
    if &bytes[..4] != DATASET_MAGIC {
        if &bytes[..3] == b"DDF" {
            return Err(DdfError::VersionMismatch {
                expected: "DDF1".into(),
                found: String::from_utf8_lossy(&bytes[..4]).into_owned(),
            });
        }
        return Err(DdfError::Format(format!("{} is not a DDF1 dataset", path.display())));
    }
    if bytes.len() < HEADER_BYTES {
        return Err(DdfError::Format("dataset header truncated".into()));
    }
    let count = u64::from_le_bytes(bytes[4..12].try_into().unwrap());
    let expected = (count as u128) * RECORD_BYTES as u128 + HEADER_BYTES as u128;
    if bytes.len() as u128 != expected {
        return Err(DdfError::Format(format!(
            "dataset declares {count} records ({expected} bytes) but file has {} bytes",
            bytes.len()
        )));
    }
    let bbox = Aabb::new(
        Vec3::new(f64_at(&bytes, 12), f64_at(&bytes, 20), f64_at(&bytes, 28)),
        Vec3::new(f64_at(&bytes, 36), f64_at(&bytes, 44), f64_at(&bytes, 52)),
    );
    let samples = bytes[HEADER_BYTES..]
        .chunks_exact(RECORD_BYTES)
        .map(|r| {
            let target = if r[40] & FLAG_MISS != 0 {
                DdfValue::Miss
            } else {
                DdfValue::Hit(f64_at(r, 41))
            };
            FieldSample {
                position: Vec3::new(f64_at(r, 0), f64_at(r, 8), f64_at(r, 16)),
                direction: Direction2::new(f64_at(r, 24), f64_at(r, 32)),
                target,
            }
        })
        .collect();
    Ok((samples, bbox))
}
