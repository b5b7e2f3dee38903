//! Embedding and extraction of whole payloads, and the stego-key sidecar.
//!
//! The stego image carries no header or marker. Everything a receiver needs
//! to find the payload lives in the key, serialized little-endian:
//!
//! | offset | size | field            |
//! |--------|------|------------------|
//! | 0      | 4    | magic `SKCS`     |
//! | 4      | 1    | format version (1) |
//! | 5      | 1    | k                |
//! | 6      | 2    | nest size        |
//! | 8      | 4    | payload length   |
//! | 12     | 4    | payload CRC-32   |
//! | 16     | 8    | master seed      |
//! | 24     | 4    | plan count       |
//! | 28     | 12·n | `{nest_index u32, order_seed u64}` per chunk, in payload order |

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::cuckoo::{self, CsParams, CuckooError, NestBlock, NestRun};
use crate::image_io::{self, nest_layout, ImageError, NestIndex, PixelGrid};
use crate::klsb::{self, KlsbError, SwapSchedule};
use crate::metrics::{self, MetricError, Objective, QualityReport};
use crate::mp3::{self, Mp3Error};

pub const KEY_MAGIC: [u8; 4] = *b"SKCS";
pub const KEY_VERSION: u8 = 1;
pub const KEY_HEADER_LEN: usize = 28;
pub const KEY_PLAN_LEN: usize = 12;

#[derive(Debug, Error)]
pub enum StegoError {
    #[error("payload exceeds capacity: required={required_bits} available={available_bits} bits")]
    Capacity {
        required_bits: u64,
        available_bits: u64,
    },
    #[error("payload is empty")]
    EmptyPayload,
    #[error("payload of {0} bytes exceeds the key's 32-bit length field")]
    PayloadTooLarge(usize),
    #[error("nest size {0} exceeds the key's 16-bit field")]
    NestSizeTooLarge(usize),
    #[error("invalid stego key: {0}")]
    Key(#[from] KeyError),
    #[error("CRC mismatch: key expects {expected:08x}, extracted payload has {actual:08x}")]
    CrcMismatch { expected: u32, actual: u32 },
    #[error("nest {index} lies outside the image ({nests} whole nests)")]
    NestOutOfBounds { index: u32, nests: usize },
    #[error(transparent)]
    Image(#[from] ImageError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Klsb(#[from] KlsbError),
    #[error(transparent)]
    Cuckoo(#[from] CuckooError),
    #[error("not an MP3 payload: {0}")]
    Mp3(#[from] Mp3Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyError {
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u8),
    #[error("key truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("{found} trailing bytes after the last plan")]
    TrailingBytes { found: usize },
    #[error("k must be in 1..=8, got {0}")]
    InvalidK(u8),
    #[error("nest size must be at least 2, got {0}")]
    InvalidNestSize(u16),
    #[error("expected {expected} plans for the payload length, found {found}")]
    PlanCount { expected: usize, found: usize },
    #[error("nest {0} is used twice")]
    DuplicateNest(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KeyPlan {
    pub nest_index: u32,
    pub order_seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StegoKey {
    pub format_version: u8,
    pub k: u8,
    pub nest_size: u16,
    pub payload_length: u32,
    pub payload_crc32: u32,
    pub master_seed: u64,
    pub plans: Vec<KeyPlan>,
}

impl StegoKey {
    pub fn encoded_len(&self) -> usize {
        KEY_HEADER_LEN + KEY_PLAN_LEN * self.plans.len()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.encoded_len());
        out.extend_from_slice(&KEY_MAGIC);
        out.push(self.format_version);
        out.push(self.k);
        out.extend_from_slice(&self.nest_size.to_le_bytes());
        out.extend_from_slice(&self.payload_length.to_le_bytes());
        out.extend_from_slice(&self.payload_crc32.to_le_bytes());
        out.extend_from_slice(&self.master_seed.to_le_bytes());
        out.extend_from_slice(&(self.plans.len() as u32).to_le_bytes());
        for p in &self.plans {
            out.extend_from_slice(&p.nest_index.to_le_bytes());
            out.extend_from_slice(&p.order_seed.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KeyError> {
        if bytes.len() < KEY_HEADER_LEN {
            if bytes.len() >= 4 && bytes[..4] != KEY_MAGIC {
                return Err(KeyError::BadMagic);
            }
            return Err(KeyError::Truncated {
                expected: KEY_HEADER_LEN,
                found: bytes.len(),
            });
        }
        if bytes[..4] != KEY_MAGIC {
            return Err(KeyError::BadMagic);
        }
        let u16_at = |o: usize| u16::from_le_bytes(bytes[o..o + 2].try_into().unwrap());
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap());
        let u64_at = |o: usize| u64::from_le_bytes(bytes[o..o + 8].try_into().unwrap());
        let plan_count = u32_at(24) as usize;
        let expected = KEY_HEADER_LEN + KEY_PLAN_LEN * plan_count;
        if bytes.len() < expected {
            return Err(KeyError::Truncated {
                expected,
                found: bytes.len(),
            });
        }
        if bytes.len() > expected {
            return Err(KeyError::TrailingBytes {
                found: bytes.len() - expected,
            });
        }
        let plans = (0..plan_count)
            .map(|i| {
                let o = KEY_HEADER_LEN + KEY_PLAN_LEN * i;
                KeyPlan {
                    nest_index: u32_at(o),
                    order_seed: u64_at(o + 4),
                }
            })
            .collect();
        let key = Self {
            format_version: bytes[4],
            k: bytes[5],
            nest_size: u16_at(6),
            payload_length: u32_at(8),
            payload_crc32: u32_at(12),
            master_seed: u64_at(16),
            plans,
        };
        key.validate()?;
        Ok(key)
    }

    /// Structural checks that need no image.
    pub fn validate(&self) -> Result<(), KeyError> {
        if self.format_version != KEY_VERSION {
            return Err(KeyError::UnsupportedVersion(self.format_version));
        }
        if !(1..=8).contains(&self.k) {
            return Err(KeyError::InvalidK(self.k));
        }
        if self.nest_size < 2 {
            return Err(KeyError::InvalidNestSize(self.nest_size));
        }
        let expected = klsb::chunk_count(
            self.payload_length as usize,
            self.k,
            self.nest_size as usize,
        );
        if self.plans.len() != expected {
            return Err(KeyError::PlanCount {
                expected,
                found: self.plans.len(),
            });
        }
        let mut seen = HashSet::with_capacity(self.plans.len());
        for p in &self.plans {
            if !seen.insert(p.nest_index) {
                return Err(KeyError::DuplicateNest(p.nest_index));
            }
        }
        Ok(())
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), StegoError> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, StegoError> {
        Ok(Self::from_bytes(&fs::read(path)?)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmbedMode {
    /// Cuckoo-search ordering and nest placement.
    Cuckoo,
    /// Raster-order nests, identity pixel order: plain LSB substitution.
    Sequential,
}

impl EmbedMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            EmbedMode::Cuckoo => "cuckoo",
            EmbedMode::Sequential => "sequential",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedConfig {
    pub k: u8,
    pub nest_size: usize,
    pub objective: Objective,
    pub search: CsParams,
    pub mode: EmbedMode,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        Self {
            k: 1,
            nest_size: 16,
            objective: Objective::default(),
            search: CsParams::default(),
            mode: EmbedMode::Cuckoo,
        }
    }
}

#[derive(Debug, Clone)]
pub struct EmbedResult {
    pub stego: PixelGrid,
    pub key: StegoKey,
    pub report: QualityReport,
    /// Per-nest search histories; empty in sequential mode.
    pub trace: Vec<NestRun>,
    /// Frame count of the carried MP3, when embedded through [`embed_mp3`].
    pub mp3_frames: Option<usize>,
}

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

pub fn embed(
    cover: &PixelGrid,
    payload: &[u8],
    config: &EmbedConfig,
) -> Result<EmbedResult, StegoError> {
    let EmbedConfig {
        k,
        nest_size,
        objective,
        search,
        mode,
    } = *config;
    klsb::check_k(k)?;
    if nest_size < 2 {
        return Err(ImageError::InvalidNestSize(nest_size).into());
    }
    let nest_size_field =
        u16::try_from(nest_size).map_err(|_| StegoError::NestSizeTooLarge(nest_size))?;
    if payload.is_empty() {
        return Err(StegoError::EmptyPayload);
    }
    let payload_length =
        u32::try_from(payload.len()).map_err(|_| StegoError::PayloadTooLarge(payload.len()))?;
    let required_bits = 8 * payload.len() as u64;
    let available_bits = klsb::capacity_bits(cover, k, nest_size);
    if required_bits > available_bits {
        return Err(StegoError::Capacity {
            required_bits,
            available_bits,
        });
    }

    let chunks = klsb::chunk_payload(payload, k, nest_size)?;
    let (_, cols) = nest_layout(cover, nest_size);
    let nest_list = image_io::nests(cover, nest_size)?;

    let (placements, trace): (Vec<(usize, u64)>, Vec<NestRun>) = match mode {
        EmbedMode::Sequential => ((0..chunks.len()).map(|i| (i, 0)).collect(), Vec::new()),
        EmbedMode::Cuckoo => {
            let blocks = nest_list
                .iter()
                .map(|&nest| {
                    Ok(NestBlock {
                        raster_index: nest.raster_index(cols),
                        nest,
                        block: image_io::extract_nest(cover, nest)?,
                    })
                })
                .collect::<Result<Vec<_>, ImageError>>()?;
            let plan = cuckoo::optimize_image(&blocks, &chunks, k, &search, &objective)?;
            (
                plan.plans
                    .iter()
                    .map(|p| (p.nest_index, p.order_seed))
                    .collect(),
                plan.runs,
            )
        }
    };

    let schedule = SwapSchedule::new(nest_size * nest_size)?;
    let mut stego = cover.clone();
    for (chunk, &(nest_index, seed)) in chunks.iter().zip(&placements) {
        let nest = NestIndex::from_raster(nest_index, cols, nest_size);
        let block = image_io::extract_nest(cover, nest)?;
        let mutated = klsb::embed_chunk(&block, chunk, &schedule.order(seed), k)?;
        image_io::write_nest(&mut stego, nest, &mutated)?;
    }

    let key = StegoKey {
        format_version: KEY_VERSION,
        k,
        nest_size: nest_size_field,
        payload_length,
        payload_crc32: crc32(payload),
        master_seed: search.master_seed,
        plans: placements
            .iter()
            .map(|&(nest_index, order_seed)| KeyPlan {
                nest_index: nest_index as u32,
                order_seed,
            })
            .collect(),
    };
    let report = metrics::quality_report(cover, &stego, &objective)?;
    Ok(EmbedResult {
        stego,
        key,
        report,
        trace,
        mp3_frames: None,
    })
}

pub fn extract(stego: &PixelGrid, key: &StegoKey) -> Result<Vec<u8>, StegoError> {
    key.validate()?;
    let nest_size = key.nest_size as usize;
    let (rows, cols) = nest_layout(stego, nest_size);
    let schedule = SwapSchedule::new(nest_size * nest_size)?;
    let mut chunks = Vec::with_capacity(key.plans.len());
    for plan in &key.plans {
        if plan.nest_index as usize >= rows * cols {
            return Err(StegoError::NestOutOfBounds {
                index: plan.nest_index,
                nests: rows * cols,
            });
        }
        let nest = NestIndex::from_raster(plan.nest_index as usize, cols, nest_size);
        let block = image_io::extract_nest(stego, nest)?;
        chunks.push(klsb::extract_chunk(
            &block,
            &schedule.order(plan.order_seed),
            key.k,
        )?);
    }
    let payload = klsb::reassemble(&chunks, key.payload_length as usize);
    let actual = crc32(&payload);
    if actual != key.payload_crc32 {
        return Err(StegoError::CrcMismatch {
            expected: key.payload_crc32,
            actual,
        });
    }
    Ok(payload)
}

/// Embeds a complete MP3 file after checking that it parses.
pub fn embed_mp3(
    cover: &PixelGrid,
    mp3_bytes: &[u8],
    config: &EmbedConfig,
) -> Result<EmbedResult, StegoError> {
    let stream = mp3::parse_mp3(mp3_bytes)?;
    let mut result = embed(cover, mp3::to_payload(&stream), config)?;
    result.mp3_frames = Some(stream.frames.len());
    Ok(result)
}

pub fn analyze(
    cover: &PixelGrid,
    stego: &PixelGrid,
    alpha: f64,
) -> Result<QualityReport, StegoError> {
    let objective = Objective::with_alpha(alpha)?;
    Ok(metrics::quality_report(cover, stego, &objective)?)
}
