//! Hashed bag-of-words features.
//!
//! Text is lowercased and split on every non-alphanumeric character. Each token is hashed
//! with 64-bit FNV-1a, whose offset basis is first mixed with [`HASH_SEED`], and reduced
//! modulo `2^k`. The hash depends only on the token's UTF-8 bytes, so features are stable
//! across processes and platforms.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

pub const DEFAULT_BUCKET_BITS: u32 = 15;
pub const MAX_BUCKET_BITS: u32 = 24;

const FNV_OFFSET_BASIS: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;
/// Mixed into the FNV offset basis.
pub const HASH_SEED: u64 = 0x0005_eed0_fda7_a5e7;

pub fn hash_token(token: &str) -> u64 {
    let mut hash = FNV_OFFSET_BASIS ^ HASH_SEED;
    for &byte in token.as_bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(FNV_PRIME);
    }
    hash
}

pub fn tokenize(text: &str) -> impl Iterator<Item = String> + '_ {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(str::to_lowercase)
}

/// Sparse token counts over `2^bits` buckets, sorted by bucket index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureVector {
    bits: u32,
    entries: Vec<(u32, u32)>,
}

impl FeatureVector {
    pub fn from_counts(bits: u32, counts: impl IntoIterator<Item = (u32, u32)>) -> Result<Self> {
        check_bits(bits)?;
        let mut merged: BTreeMap<u32, u32> = BTreeMap::new();
        for (index, count) in counts {
            if u64::from(index) >= 1u64 << bits {
                return Err(Error::invalid(format!(
                    "feature index {index} outside 2^{bits} buckets"
                )));
            }
            if count > 0 {
                *merged.entry(index).or_default() += count;
            }
        }
        Ok(Self {
            bits,
            entries: merged.into_iter().collect(),
        })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn entries(&self) -> &[(u32, u32)] {
        &self.entries
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_count(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    /// Bucket-wise sum of counts.
    pub fn add(&self, other: &FeatureVector) -> Result<FeatureVector> {
        if self.bits != other.bits {
            return Err(Error::shape(format!(
                "feature widths 2^{} vs 2^{}",
                self.bits, other.bits
            )));
        }
        Self::from_counts(self.bits, self.entries.iter().chain(&other.entries).copied())
    }

    pub fn scale(&self, factor: u32) -> FeatureVector {
        Self {
            bits: self.bits,
            entries: if factor == 0 {
                Vec::new()
            } else {
                self.entries.iter().map(|&(i, c)| (i, c * factor)).collect()
            },
        }
    }
}

fn check_bits(bits: u32) -> Result<()> {
    if bits == 0 || bits > MAX_BUCKET_BITS {
        return Err(Error::invalid(format!(
            "bucket exponent {bits} outside 1..={MAX_BUCKET_BITS}"
        )));
    }
    Ok(())
}

pub fn featurize(text: &str, bits: u32) -> Result<FeatureVector> {
    check_bits(bits)?;
    let mask = (1u64 << bits) - 1;
    FeatureVector::from_counts(bits, tokenize(text).map(|t| ((hash_token(&t) & mask) as u32, 1)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_text_has_no_features() {
        assert!(featurize("", 15).unwrap().is_empty());
        assert!(featurize(" ,.;-- ", 15).unwrap().is_empty());
    }

    #[test]
    fn case_folding_collapses_tokens() {
        let fv = featurize("Cat cat CAT", 15).unwrap();
        assert_eq!(fv.entries().len(), 1);
        assert_eq!(fv.entries()[0].1, 3);
    }

    #[test]
    fn hash_values_are_pinned() {
        // frozen from an independent FNV-1a computation
        assert_eq!(hash_token("cat"), 0xb214_5836_a81e_0c26);
        assert_eq!(hash_token("wasserstein"), 0x1714_3bdb_b5e4_d764);
        assert_eq!(hash_token(""), FNV_OFFSET_BASIS ^ HASH_SEED);
        assert_eq!(featurize("Wasserstein", 15).unwrap().entries(), &[(22372, 1)]);
        assert_eq!(featurize("cat", 15).unwrap().entries(), &[(3110, 1)]);
    }

    #[test]
    fn splits_on_non_alphanumeric() {
        let a = featurize("state-of-the-art", 15).unwrap();
        let b = featurize("state of the art", 15).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn rejects_bad_widths() {
        assert!(featurize("x", 0).is_err());
        assert!(featurize("x", 40).is_err());
        assert!(FeatureVector::from_counts(3, [(8, 1)]).is_err());
    }
}
