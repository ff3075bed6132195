//! `DDFN` checkpoints and loss-history CSV.
//!
//! Layout (little-endian): magic `DDFN`, version `u32`, layer count `u32`,
//! `layer count + 1` widths as `u32`, `δ` as `f64`, then every parameter as
//! `f64` in model order.

use std::fs;
use std::io::Write;
use std::path::Path;

use super::MlpModel;
use crate::error::{DdfError, Result};

pub const CHECKPOINT_VERSION: u32 = 1;
const MAGIC: &[u8; 4] = b"DDFN";

pub fn save_model(model: &MlpModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut buf = Vec::with_capacity(32 + model.param_count() * 8);
    buf.extend_from_slice(MAGIC);
    buf.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    buf.extend_from_slice(&(model.layer_count() as u32).to_le_bytes());
    for &w in model.widths() {
        buf.extend_from_slice(&(w as u32).to_le_bytes());
    }
    buf.extend_from_slice(&model.delta.to_le_bytes());
    for p in model.params() {
        buf.extend_from_slice(&p.to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| DdfError::io(path, e))
}

struct Reader<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or_else(|| {
            DdfError::Format(format!("checkpoint truncated at byte {} (needed {n} more)", self.at))
        })?;
        let out = &self.bytes[self.at..end];
        self.at = end;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Loads a checkpoint. The widths stored in the file are authoritative.
/// Dropout is a training setting and is not stored; loaded models have none.
pub fn load_model(path: impl AsRef<Path>) -> Result<MlpModel> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DdfError::io(path, e))?;
    let mut r = Reader { bytes: &bytes, at: 0 };
    if r.take(4)? != MAGIC {
        return Err(DdfError::Format(format!("{} is not a DDFN checkpoint", path.display())));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(DdfError::VersionMismatch {
            expected: CHECKPOINT_VERSION.to_string(),
            found: version.to_string(),
        });
    }
    let layers = r.u32()? as usize;
    if layers == 0 || layers > 1024 {
        return Err(DdfError::Format(format!("implausible layer count {layers}")));
    }
    let widths = (0..=layers).map(|_| r.u32().map(|w| w as usize)).collect::<Result<Vec<_>>>()?;
    let delta = r.f64()?;
    let count = MlpModel::param_count_for(&widths);
    let remaining = bytes.len() - r.at;
    if remaining != count * 8 {
        return Err(DdfError::Format(format!(
            "checkpoint holds {remaining} parameter bytes, widths {widths:?} need {}",
            count * 8
        )));
    }
    let params = (0..count).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
    MlpModel::from_params(widths, params, 0.0, delta)
}

pub fn write_loss_csv(losses: &[(usize, f64)], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::with_capacity(losses.len() * 24);
    writeln!(out, "iteration,loss").unwrap();
    for (i, l) in losses {
        writeln!(out, "{i},{l:?}").unwrap();
    }
    fs::write(path, out).map_err(|e| DdfError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn model() -> MlpModel {
        MlpModel::new(&[16, 8], 0.0, 0.07, &mut ChaCha8Rng::seed_from_u64(11))
    }

    #[test]
    fn round_trip_is_bitwise() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ddfn");
        let m = model();
        save_model(&m, &path).unwrap();
        let back = load_model(&path).unwrap();
        assert_eq!(back.widths(), m.widths());
        assert_eq!(back.delta, 0.07);
        let mut r = ChaCha8Rng::seed_from_u64(1);
        let inputs: Vec<f64> = (0..500).map(|_| r.gen_range(-1.0..1.0)).collect();
        let a = m.predict_batch(&inputs);
        let b = back.predict_batch(&inputs);
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn truncated_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ddfn");
        save_model(&model(), &path).unwrap();
        let bytes = fs::read(&path).unwrap();
        for cut in [3, 10, 30, bytes.len() - 1] {
            fs::write(&path, &bytes[..cut]).unwrap();
            assert!(matches!(load_model(&path), Err(DdfError::Format(_))), "cut {cut}");
        }
    }

    #[test]
    fn wrong_magic_and_version() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ddfn");
        save_model(&model(), &path).unwrap();
        let mut bytes = fs::read(&path).unwrap();
        bytes[4] = 9;
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(DdfError::VersionMismatch { .. })));
        bytes[0] = b'X';
        fs::write(&path, &bytes).unwrap();
        assert!(matches!(load_model(&path), Err(DdfError::Format(_))));
    }

    #[test]
    fn file_widths_are_authoritative() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.ddfn");
        let m = MlpModel::new(&[3], 0.0, 0.1, &mut ChaCha8Rng::seed_from_u64(0));
        save_model(&m, &path).unwrap();
        assert_eq!(load_model(&path).unwrap().widths(), &[5, 3, 1]);
    }

    #[test]
    fn loss_csv_format() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("loss.csv");
        write_loss_csv(&[(1, 0.5), (2, 0.25)], &path).unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "iteration,loss\n1,0.5\n2,0.25\n");
    }
}
