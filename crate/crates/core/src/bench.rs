//! Benchmark harness comparing cuckoo-ordered embedding against plain
//! sequential LSB substitution, with synthetic stand-ins for the usual test
//! photographs.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::cuckoo::CsParams;
use crate::image_io::{self, ImageError, PixelGrid};
use crate::klsb;
use crate::metrics::Objective;
use crate::rng::SplitMix64;
use crate::stego::{self, EmbedConfig, EmbedMode, StegoError};

pub const SYNTHETIC_SIDE: usize = 512;
pub const TEXTURE_NAME: &str = "synthetic-texture";
pub const SMOOTH_NAME: &str = "synthetic-smooth";
/// CRC-32 of the generated sample buffers; guards against formula drift.
pub const TEXTURE_CRC32: u32 = 0x2A5B_2F17;
pub const SMOOTH_CRC32: u32 = 0xC007_2078;

const PAYLOAD_STREAM: u64 = 0x5041_594C_4F41_4453;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("at least one seed is required")]
    NoSeeds,
    #[error("image {name}: {source}")]
    Image { name: String, source: ImageError },
    #[error("image {name}: {source}")]
    Embed { name: String, source: StegoError },
    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

/// High-frequency pattern standing in for a textured photograph.
pub fn synthetic_texture() -> PixelGrid {
    PixelGrid::from_fn(SYNTHETIC_SIDE, SYNTHETIC_SIDE, |x, y| {
        let (x, y) = (x as u32, y as u32);
        let weave = (x * 37 + y * 11) ^ (x * y * 3) ^ ((x >> 2) * (y >> 3) * 5);
        let ripple = ((x * x + 3 * y * y) >> 4) & 0x3F;
        ((weave & 0xBF) + ripple) as u8
    })
}

/// Low-frequency gradient with a soft bright disc, standing in for a portrait.
pub fn synthetic_smooth() -> PixelGrid {
    PixelGrid::from_fn(SYNTHETIC_SIDE, SYNTHETIC_SIDE, |x, y| {
        let ramp = (x + 2 * y) * 160 / (3 * (SYNTHETIC_SIDE - 1));
        let (dx, dy) = (x as i64 - 300, y as i64 - 200);
        let d2 = (dx * dx + dy * dy) as usize;
        let disc = if d2 < 120 * 120 {
            80 - d2 * 80 / (120 * 120)
        } else {
            0
        };
        (20 + ramp + disc) as u8
    })
}

#[derive(Debug, Clone)]
pub struct BenchImage {
    pub name: String,
    pub grid: PixelGrid,
}

impl BenchImage {
    pub fn load(path: &Path) -> Result<Self, BenchError> {
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| path.display().to_string());
        let grid = image_io::load_image(path).map_err(|source| BenchError::Image {
            name: name.clone(),
            source,
        })?;
        Ok(Self { name, grid })
    }

    pub fn synthetic_pair() -> Vec<Self> {
        vec![
            Self {
                name: TEXTURE_NAME.into(),
                grid: synthetic_texture(),
            },
            Self {
                name: SMOOTH_NAME.into(),
                grid: synthetic_smooth(),
            },
        ]
    }
}

#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct BenchRow {
    pub image: String,
    pub method: &'static str,
    pub k: u8,
    pub payload_bytes: usize,
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub z: f64,
    pub wall_time_ms: u64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    /// `None` embeds a quarter of each image's capacity.
    pub payload_bytes: Option<usize>,
    pub k: u8,
    pub seeds: u64,
    pub nest_size: usize,
    pub objective: Objective,
    /// Search budget; `master_seed` is overwritten per run.
    pub search: CsParams,
    /// Wall time is zeroed unless set, so repeated runs give identical CSVs.
    pub record_time: bool,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            payload_bytes: None,
            k: 1,
            seeds: 5,
            nest_size: 16,
            objective: Objective::default(),
            search: CsParams::default(),
            record_time: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SummaryRow {
    pub image: String,
    pub sequential_z: f64,
    pub cuckoo_z: f64,
}

pub fn quarter_capacity_bytes(grid: &PixelGrid, k: u8, nest_size: usize) -> usize {
    (klsb::capacity_bits(grid, k, nest_size) / 32) as usize
}

pub fn bench_payload(len: usize, seed: u64) -> Vec<u8> {
    let mut rng = SplitMix64::stream(PAYLOAD_STREAM, seed);
    (0..len).map(|_| rng.next_u64() as u8).collect()
}

pub fn run(images: &[BenchImage], config: &BenchConfig) -> Result<Vec<BenchRow>, BenchError> {
    if config.seeds == 0 {
        return Err(BenchError::NoSeeds);
    }
    let cells: Vec<(usize, EmbedMode, u64)> = (0..images.len())
        .flat_map(|i| {
            [EmbedMode::Sequential, EmbedMode::Cuckoo]
                .into_iter()
                .flat_map(move |m| (0..config.seeds).map(move |s| (i, m, s)))
        })
        .collect();

    // nest searches already run in parallel inside each cuckoo cell
    let mut rows = cells
        .into_par_iter()
        .with_max_len(1)
        .map(|(i, mode, seed)| run_cell(&images[i], mode, seed, config))
        .collect::<Result<Vec<_>, _>>()?;
    let order = |name: &str| images.iter().position(|im| im.name == name);
    rows.sort_by(|a, b| {
        (order(&a.image), a.method, a.seed).cmp(&(order(&b.image), b.method, b.seed))
    });
    Ok(rows)
}

fn run_cell(
    image: &BenchImage,
    mode: EmbedMode,
    seed: u64,
    config: &BenchConfig,
) -> Result<BenchRow, BenchError> {
    let len = config
        .payload_bytes
        .unwrap_or_else(|| quarter_capacity_bytes(&image.grid, config.k, config.nest_size));
    let payload = bench_payload(len, seed);
    let embed_config = EmbedConfig {
        k: config.k,
        nest_size: config.nest_size,
        objective: config.objective,
        search: CsParams {
            master_seed: seed,
            ..config.search
        },
        mode,
    };
    let started = Instant::now();
    let result =
        stego::embed(&image.grid, &payload, &embed_config).map_err(|source| BenchError::Embed {
            name: image.name.clone(),
            source,
        })?;
    let elapsed = started.elapsed().as_millis() as u64;
    let r = result.report;
    Ok(BenchRow {
        image: image.name.clone(),
        method: mode.as_str(),
        k: config.k,
        payload_bytes: len,
        mse: r.mse,
        psnr_db: r.psnr_db,
        ssim: r.ssim,
        z: r.z,
        wall_time_ms: if config.record_time { elapsed } else { 0 },
        seed,
    })
}

pub fn write_csv<W: Write>(rows: &[BenchRow], out: W) -> Result<(), BenchError> {
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Mean Z per image and method, in first-seen image order.
pub fn summarize(rows: &[BenchRow]) -> Vec<SummaryRow> {
    let mut names: Vec<&str> = Vec::new();
    for r in rows {
        if !names.contains(&r.image.as_str()) {
            names.push(&r.image);
        }
    }
    let mean = |name: &str, method: &str| {
        let zs: Vec<f64> = rows
            .iter()
            .filter(|r| r.image == name && r.method == method)
            .map(|r| r.z)
            .collect();
        if zs.is_empty() {
            f64::NAN
        } else {
            zs.iter().sum::<f64>() / zs.len() as f64
        }
    };
    names
        .into_iter()
        .map(|name| SummaryRow {
            image: name.to_string(),
            sequential_z: mean(name, EmbedMode::Sequential.as_str()),
            cuckoo_z: mean(name, EmbedMode::Cuckoo.as_str()),
        })
        .collect()
}

pub fn format_summary(summary: &[SummaryRow]) -> String {
    let width = summary
        .iter()
        .map(|s| s.image.len())
        .max()
        .unwrap_or(0)
        .max(10);
    let mut out = format!(
        "{:<width$}  {:>20}  {:>20}\n",
        "Host Image", "Simple LSB (mean Z)", "Cuckoo (mean Z)"
    );
    for s in summary {
        out += &format!(
            "{:<width$}  {:>20.6}  {:>20.6}\n",
            s.image, s.sequential_z, s.cuckoo_z
        );
    }
    out
}

pub fn summary_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("summary.txt")
}
