//! Encoder parameters and their binary file format.
//!
//! Layout (all integers and floats little-endian):
//!
//! | bytes | field |
//! | ----- | ----- |
//! | 8 | magic `SYCLENC1` |
//! | 4 | `u32` bucket exponent `k` |
//! | 4 | `u32` embedding dimension `d` |
//! | 1 | `u8` bias flag (0 or 1) |
//! | `8 * 2^k * d` | weights, row-major `f64` |
//! | `8 * d` | bias `f64`, only when the flag is 1 |

use std::fs;
use std::path::Path;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"SYCLENC1";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_DIM: usize = 64;

const HEADER_LEN: usize = 8 + 4 + 4 + 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EncoderParams {
    bucket_bits: u32,
    dim: usize,
    /// `2^bucket_bits x dim`, row-major.
    weights: Vec<f64>,
    bias: Option<Vec<f64>>,
    /// Seed used for initialisation; not stored in the file.
    pub seed: Option<u64>,
    pub version: u32,
}

impl EncoderParams {
    pub fn zeros(bucket_bits: u32, dim: usize, bias: bool) -> Result<Self> {
        let rows = rows_for(bucket_bits)?;
        if dim == 0 {
            return Err(Error::invalid("embedding dimension must be positive"));
        }
        Ok(Self {
            bucket_bits,
            dim,
            weights: vec![0.0; rows * dim],
            bias: bias.then(|| vec![0.0; dim]),
            seed: None,
            version: FORMAT_VERSION,
        })
    }

    /// Weights uniform in `(-1/sqrt(d), 1/sqrt(d))`, bias zero.
    pub fn random(bucket_bits: u32, dim: usize, bias: bool, seed: u64) -> Result<Self> {
        let mut params = Self::zeros(bucket_bits, dim, bias)?;
        let bound = 1.0 / (dim as f64).sqrt();
        let dist = Uniform::new(-bound, bound).expect("non-empty range");
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for w in &mut params.weights {
            *w = dist.sample(&mut rng);
        }
        params.seed = Some(seed);
        Ok(params)
    }

    pub fn from_parts(bucket_bits: u32, dim: usize, weights: Vec<f64>, bias: Option<Vec<f64>>) -> Result<Self> {
        let rows = rows_for(bucket_bits)?;
        if weights.len() != rows * dim {
            return Err(Error::shape(format!(
                "expected {} weights for 2^{bucket_bits} x {dim}, got {}",
                rows * dim,
                weights.len()
            )));
        }
        if let Some(b) = &bias {
            if b.len() != dim {
                return Err(Error::shape(format!("bias length {} vs dim {dim}", b.len())));
            }
        }
        if let Some(i) = weights.iter().chain(bias.iter().flatten()).position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("parameter {i}")));
        }
        Ok(Self {
            bucket_bits,
            dim,
            weights,
            bias,
            seed: None,
            version: FORMAT_VERSION,
        })
    }

    pub fn bucket_bits(&self) -> u32 {
        self.bucket_bits
    }

    pub fn buckets(&self) -> usize {
        1 << self.bucket_bits
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.weights
    }

    pub fn weight_row(&self, bucket: usize) -> &[f64] {
        &self.weights[bucket * self.dim..(bucket + 1) * self.dim]
    }

    pub fn bias(&self) -> Option<&[f64]> {
        self.bias.as_deref()
    }

    pub fn bias_mut(&mut self) -> Option<&mut [f64]> {
        self.bias.as_deref_mut()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let n_floats = self.weights.len() + self.bias.as_ref().map_or(0, Vec::len);
        let mut out = Vec::with_capacity(HEADER_LEN + 8 * n_floats);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.bucket_bits.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.push(u8::from(self.bias.is_some()));
        for v in self.weights.iter().chain(self.bias.iter().flatten()) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let truncated = |offset: usize, what: &str| Error::Format {
            offset,
            message: format!("truncated {what}"),
        };
        if bytes.len() < MAGIC.len() {
            return Err(truncated(bytes.len(), "magic"));
        }
        if &bytes[..8] != MAGIC {
            return Err(Error::Format {
                offset: 0,
                message: "unrecognized format".to_string(),
            });
        }
        if bytes.len() < HEADER_LEN {
            return Err(truncated(bytes.len(), "header"));
        }
        let bucket_bits = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        let dim = u32::from_le_bytes(bytes[12..16].try_into().expect("4 bytes")) as usize;
        let has_bias = match bytes[16] {
            0 => false,
            1 => true,
            other => {
                return Err(Error::Format {
                    offset: 16,
                    message: format!("bias flag {other} is neither 0 nor 1"),
                })
            }
        };
        let rows = rows_for(bucket_bits).map_err(|e| Error::Format {
            offset: 8,
            message: e.to_string(),
        })?;
        if dim == 0 {
            return Err(Error::Format {
                offset: 12,
                message: "embedding dimension is zero".to_string(),
            });
        }
        let n_weights = rows * dim;
        let n_floats = n_weights + if has_bias { dim } else { 0 };
        let expected = HEADER_LEN + 8 * n_floats;
        if bytes.len() < expected {
            let offset = HEADER_LEN + (bytes.len() - HEADER_LEN) / 8 * 8;
            return Err(truncated(offset, "parameter data"));
        }
        if bytes.len() > expected {
            return Err(Error::Format {
                offset: expected,
                message: format!("{} trailing bytes", bytes.len() - expected),
            });
        }
        let mut floats = bytes[HEADER_LEN..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")));
        let weights: Vec<f64> = floats.by_ref().take(n_weights).collect();
        let bias = has_bias.then(|| floats.collect::<Vec<f64>>());
        Self::from_parts(bucket_bits, dim, weights, bias)
    }
}

fn rows_for(bucket_bits: u32) -> Result<usize> {
    if bucket_bits == 0 || bucket_bits > super::features::MAX_BUCKET_BITS {
        return Err(Error::invalid(format!(
            "bucket exponent {bucket_bits} outside 1..={}",
            super::features::MAX_BUCKET_BITS
        )));
    }
    Ok(1usize << bucket_bits)
}

pub fn save_params(params: &EncoderParams, path: &Path) -> Result<()> {
    fs::write(path, params.to_bytes())?;
    Ok(())
}

pub fn load_params(path: &Path) -> Result<EncoderParams> {
    EncoderParams::from_bytes(&fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let mut params = EncoderParams::random(4, 3, true, 9).unwrap();
        params.bias_mut().unwrap().copy_from_slice(&[0.1, -0.0, f64::MIN_POSITIVE]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.bin");
        save_params(&params, &path).unwrap();
        let loaded = load_params(&path).unwrap();
        let bits = |p: &EncoderParams| -> Vec<u64> {
            p.weights().iter().chain(p.bias().unwrap()).map(|v| v.to_bits()).collect()
        };
        assert_eq!(bits(&loaded), bits(&params));
        assert_eq!((loaded.bucket_bits(), loaded.dim()), (4, 3));
    }

    #[test]
    fn header_layout() {
        let bytes = EncoderParams::zeros(2, 3, false).unwrap().to_bytes();
        assert_eq!(&bytes[..8], b"SYCLENC1");
        assert_eq!(&bytes[8..12], &2u32.to_le_bytes());
        assert_eq!(&bytes[12..16], &3u32.to_le_bytes());
        assert_eq!(bytes[16], 0);
        assert_eq!(bytes.len(), 17 + 8 * 4 * 3);
    }

    #[test]
    fn truncated_file_reports_offset() {
        let bytes = EncoderParams::random(3, 2, true, 1).unwrap().to_bytes();
        let err = EncoderParams::from_bytes(&bytes[..bytes.len() - 3]).unwrap_err();
        match err {
            Error::Format { offset, ref message } => {
                assert!(message.contains("truncated"));
                assert_eq!(offset, 17 + 8 * (16 + 1));
            }
            other => panic!("unexpected {other}"),
        }
        assert!(EncoderParams::from_bytes(&bytes[..12]).is_err());
    }

    #[test]
    fn wrong_magic_is_unrecognized() {
        let mut bytes = EncoderParams::zeros(1, 1, false).unwrap().to_bytes();
        bytes[0] = b'X';
        let err = EncoderParams::from_bytes(&bytes).unwrap_err();
        assert!(err.to_string().contains("unrecognized format"));
    }

    #[test]
    fn random_init_is_bounded_and_seeded() {
        let a = EncoderParams::random(5, 16, false, 3).unwrap();
        let b = EncoderParams::random(5, 16, false, 3).unwrap();
        assert_eq!(a, b);
        assert!(a.weights().iter().all(|w| w.abs() < 0.25));
        assert_ne!(a, EncoderParams::random(5, 16, false, 4).unwrap());
    }
}
