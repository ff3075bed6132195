use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{DdfError, Result};

/// Row-major image with 1 (scalar) or 3 (linear RGB) channels, plus a
/// per-pixel hit mask.
#[derive(Clone, Debug, PartialEq)]
pub struct Framebuffer {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f64>,
    pub hit: Vec<bool>,
}

impl Framebuffer {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3);
        Framebuffer {
            width,
            height,
            channels,
            data: vec![0.0; width * height * channels],
            hit: vec![false; width * height],
        }
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f64] {
        let i = (y * self.width + x) * self.channels;
        &self.data[i..i + self.channels]
    }

    pub fn set(&mut self, x: usize, y: usize, value: &[f64]) {
        let i = (y * self.width + x) * self.channels;
        self.data[i..i + self.channels].copy_from_slice(value);
    }

    /// 8-bit values for display. RGB is gamma-encoded (2.2); scalar images
    /// are scaled so the largest hit value is white and misses are white.
    pub fn to_bytes(&self) -> Vec<u8> {
        let quantize = |v: f64| (v.clamp(0.0, 1.0) * 255.0).round() as u8;
        let mut out = Vec::with_capacity(self.width * self.height * 3);
        if self.channels == 3 {
            for v in &self.data {
                out.push(quantize(v.max(0.0).powf(1.0 / 2.2)));
            }
        } else {
            let max = self
                .data
                .iter()
                .zip(&self.hit)
                .filter(|(_, &h)| h)
                .map(|(v, _)| *v)
                .fold(0.0, f64::max);
            for (v, &h) in self.data.iter().zip(&self.hit) {
                let g = if !h {
                    255
                } else if max > 0.0 {
                    quantize(v / max)
                } else {
                    0
                };
                out.extend([g, g, g]);
            }
        }
        out
    }

    /// Binary PPM (P6).
    pub fn write_ppm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        write!(buf, "P6\n{} {}\n255\n", self.width, self.height).unwrap();
        buf.extend_from_slice(&self.to_bytes());
        fs::write(path, buf).map_err(|e| DdfError::io(path, e))
    }

    /// PFM with 32-bit little-endian floats, bottom row first.
    pub fn write_pfm(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut buf = Vec::new();
        let tag = if self.channels == 3 { "PF" } else { "Pf" };
        write!(buf, "{tag}\n{} {}\n-1.0\n", self.width, self.height).unwrap();
        for y in (0..self.height).rev() {
            for x in 0..self.width {
                for v in self.pixel(x, y) {
                    buf.extend_from_slice(&(*v as f32).to_le_bytes());
                }
            }
        }
        fs::write(path, buf).map_err(|e| DdfError::io(path, e))
    }
}
