//! k-LSB substitution, seeded intra-nest pixel orders and payload chunking.
//!
//! Bit order is MSB-first everywhere: within payload bytes, and within the
//! k-bit group written into each pixel.
//!
//! # Pixel orders
//!
//! A [`PixelOrder`] is a permutation of the `n` pixel positions of a nest:
//! chunk group `p` is written into raster pixel `perm[p]`. Orders are
//! regenerated from a 64-bit seed through a fixed swap schedule:
//!
//! ```text
//! rng = SplitMix64(0x5357415053434844 ^ n)
//! for i in 0..64:  a_i = rng.below(n); b_i = rng.below(n - 1); if b_i >= a_i { b_i += 1 }
//! perm = [0, 1, .., n-1]
//! for i in 0..64:  if seed bit i is set { swap(perm[a_i], perm[b_i]) }
//! ```
//!
//! Seed 0 is the identity order. Flipping one seed bit changes the resulting
//! permutation by exactly one transposition, so local moves in seed space
//! are local moves in permutation space.

use thiserror::Error;

use crate::image_io::{nest_layout, PixelGrid};
use crate::rng::SplitMix64;

pub const SCHEDULE_SEED: u64 = 0x5357_4150_5343_4844;
pub const SCHEDULE_LEN: usize = 64;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KlsbError {
    #[error("k must be in 1..=8, got {0}")]
    InvalidK(u8),
    #[error("expected {expected} bits, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("bit values must be 0 or 1")]
    NotABit,
    #[error("nest size must be at least 2, got {0}")]
    InvalidNestSize(usize),
    #[error("not a permutation of 0..{0}")]
    NotAPermutation(usize),
}

pub fn check_k(k: u8) -> Result<(), KlsbError> {
    if (1..=8).contains(&k) {
        Ok(())
    } else {
        Err(KlsbError::InvalidK(k))
    }
}

#[inline]
pub(crate) fn low_mask(k: u8) -> u8 {
    (((1u16) << k) - 1) as u8
}

/// Replaces the `k` low bits of `value` with `group` (already masked).
#[inline]
pub(crate) fn mutate_value(value: u8, group: u8, k: u8) -> u8 {
    (value & !low_mask(k)) | group
}

/// `a ~ bits`: substitutes the `k` least significant bits of `a`.
pub fn mutate_pixel(a: u8, bits: &[u8], k: u8) -> Result<u8, KlsbError> {
    check_k(k)?;
    if bits.len() != k as usize {
        return Err(KlsbError::LengthMismatch {
            expected: k as usize,
            actual: bits.len(),
        });
    }
    Ok(mutate_value(a, pack_group(bits)?, k))
}

pub fn read_pixel_bits(a: u8, k: u8) -> Result<Vec<u8>, KlsbError> {
    check_k(k)?;
    Ok((0..k).rev().map(|i| (a >> i) & 1).collect())
}

fn pack_group(bits: &[u8]) -> Result<u8, KlsbError> {
    bits.iter().try_fold(0u8, |acc, &b| match b {
        0 | 1 => Ok((acc << 1) | b),
        _ => Err(KlsbError::NotABit),
    })
}

/// Ordered message bits, one `0`/`1` value per element.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BitChunk {
    bits: Vec<u8>,
}

impl BitChunk {
    pub fn new(bits: Vec<u8>) -> Result<Self, KlsbError> {
        if bits.iter().any(|&b| b > 1) {
            return Err(KlsbError::NotABit);
        }
        Ok(Self { bits })
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// Packs consecutive `k`-bit runs into per-pixel group values.
    pub fn groups(&self, k: u8) -> Vec<u8> {
        self.bits
            .chunks(k as usize)
            .map(|c| c.iter().fold(0u8, |acc, &b| (acc << 1) | b))
            .collect()
    }

    pub(crate) fn from_groups(groups: &[u8], k: u8) -> Self {
        let mut bits = Vec::with_capacity(groups.len() * k as usize);
        for &g in groups {
            bits.extend((0..k).rev().map(|i| (g >> i) & 1));
        }
        Self { bits }
    }
}

/// The fixed swap schedule for nests of `len` pixels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SwapSchedule {
    len: usize,
    swaps: [(u32, u32); SCHEDULE_LEN],
}

impl SwapSchedule {
    pub fn new(len: usize) -> Result<Self, KlsbError> {
        if len < 2 {
            return Err(KlsbError::NotAPermutation(len));
        }
        let mut rng = SplitMix64::new(SCHEDULE_SEED ^ len as u64);
        let mut swaps = [(0u32, 0u32); SCHEDULE_LEN];
        for s in swaps.iter_mut() {
            let a = rng.below(len as u64);
            let mut b = rng.below(len as u64 - 1);
            if b >= a {
                b += 1;
            }
            *s = (a as u32, b as u32);
        }
        Ok(Self { len, swaps })
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Writes the permutation for `seed` into `perm` (resized to `len`).
    pub fn fill(&self, seed: u64, perm: &mut Vec<u32>) {
        perm.clear();
        perm.extend(0..self.len as u32);
        let mut bits = seed;
        while bits != 0 {
            let i = bits.trailing_zeros() as usize;
            let (a, b) = self.swaps[i];
            perm.swap(a as usize, b as usize);
            bits &= bits - 1;
        }
    }

    pub fn order(&self, seed: u64) -> PixelOrder {
        let mut perm = Vec::with_capacity(self.len);
        self.fill(seed, &mut perm);
        PixelOrder {
            perm: perm.into_iter().map(|p| p as usize).collect(),
            seed: Some(seed),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelOrder {
    perm: Vec<usize>,
    seed: Option<u64>,
}

impl PixelOrder {
    pub fn from_seed(seed: u64, len: usize) -> Result<Self, KlsbError> {
        Ok(SwapSchedule::new(len)?.order(seed))
    }

    pub fn identity(len: usize) -> Self {
        Self {
            perm: (0..len).collect(),
            seed: Some(0),
        }
    }

    /// An explicit permutation; it carries no seed and cannot go into a key.
    pub fn from_perm(perm: Vec<usize>) -> Result<Self, KlsbError> {
        let mut seen = vec![false; perm.len()];
        for &p in &perm {
            if p >= perm.len() || std::mem::replace(&mut seen[p], true) {
                return Err(KlsbError::NotAPermutation(perm.len()));
            }
        }
        Ok(Self { perm, seed: None })
    }

    pub fn perm(&self) -> &[usize] {
        &self.perm
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.perm.len()
    }

    pub fn is_empty(&self) -> bool {
        self.perm.is_empty()
    }
}

fn check_block(block: &PixelGrid, order: &PixelOrder) -> Result<(), KlsbError> {
    let n = block.samples().len();
    if order.len() != n {
        return Err(KlsbError::LengthMismatch {
            expected: n,
            actual: order.len(),
        });
    }
    Ok(())
}

/// Writes chunk group `p` into pixel `order.perm()[p]`. Every pixel receives
/// a group; the input block is left untouched.
pub fn embed_chunk(
    block: &PixelGrid,
    chunk: &BitChunk,
    order: &PixelOrder,
    k: u8,
) -> Result<PixelGrid, KlsbError> {
    check_k(k)?;
    check_block(block, order)?;
    let expected = k as usize * block.samples().len();
    if chunk.len() != expected {
        return Err(KlsbError::LengthMismatch {
            expected,
            actual: chunk.len(),
        });
    }
    let mut out = block.clone();
    let samples = out.samples_mut();
    for (&pixel, group) in order.perm().iter().zip(chunk.groups(k)) {
        samples[pixel] = mutate_value(samples[pixel], group, k);
    }
    Ok(out)
}

pub fn extract_chunk(block: &PixelGrid, order: &PixelOrder, k: u8) -> Result<BitChunk, KlsbError> {
    check_k(k)?;
    check_block(block, order)?;
    let mask = low_mask(k);
    let groups: Vec<u8> = order
        .perm()
        .iter()
        .map(|&pixel| block.samples()[pixel] & mask)
        .collect();
    Ok(BitChunk::from_groups(&groups, k))
}

/// Splits payload bits into chunks of `k * nest_size^2` bits, zero-padding
/// the last one.
pub fn chunk_payload(payload: &[u8], k: u8, nest_size: usize) -> Result<Vec<BitChunk>, KlsbError> {
    check_k(k)?;
    if nest_size < 2 {
        return Err(KlsbError::InvalidNestSize(nest_size));
    }
    let chunk_bits = k as usize * nest_size * nest_size;
    let mut bits: Vec<u8> = payload
        .iter()
        .flat_map(|&byte| (0..8).rev().map(move |i| (byte >> i) & 1))
        .collect();
    let padded = bits.len().div_ceil(chunk_bits) * chunk_bits;
    bits.resize(padded, 0);
    Ok(bits
        .chunks(chunk_bits)
        .map(|c| BitChunk { bits: c.to_vec() })
        .collect())
}

pub fn chunk_count(payload_len: usize, k: u8, nest_size: usize) -> usize {
    (8 * payload_len).div_ceil(k as usize * nest_size * nest_size)
}

/// Concatenates chunk bits and keeps the first `payload_len` bytes.
pub fn reassemble(chunks: &[BitChunk], payload_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(payload_len);
    let mut bits = chunks.iter().flat_map(|c| c.bits.iter().copied());
    for _ in 0..payload_len {
        let byte = (&mut bits).take(8).fold(0u8, |acc, b| (acc << 1) | b);
        out.push(byte);
    }
    out
}

/// Payload bits the whole nests of `grid` can hold.
pub fn capacity_bits(grid: &PixelGrid, k: u8, nest_size: usize) -> u64 {
    if nest_size < 2 {
        return 0;
    }
    let (rows, cols) = nest_layout(grid, nest_size);
    k as u64 * (nest_size * nest_size) as u64 * (rows * cols) as u64
}
