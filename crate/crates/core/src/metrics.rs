//! Distortion metrics between a cover and a candidate stego region.
//!
//! MSE is normalized by the pixel count. PSNR is `10 log10(255^2 / MSE)` and
//! reports [`PSNR_INFINITE`] for identical inputs. SSIM uses population
//! moments over a single window; [`ssim_global`] averages it over
//! non-overlapping tiles. The fitness `Z = alpha * SSIM + (1 - alpha) * PSNR`
//! caps PSNR at [`PSNR_CAP`] so that it stays finite and totally ordered.

use serde::Serialize;
use thiserror::Error;

use crate::image_io::PixelGrid;

pub const MAX_INTENSITY: f64 = 255.0;
pub const PSNR_INFINITE: f64 = f64::INFINITY;
pub const PSNR_CAP: f64 = 100.0;
pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_SSIM_TILE: usize = 8;

#[derive(Debug, Error, PartialEq)]
pub enum MetricError {
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(usize, usize, usize, usize),
    #[error("alpha must lie in [0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("SSIM constants must be positive")]
    InvalidConstants,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsimConstants {
    pub c1: f64,
    pub c2: f64,
}

impl SsimConstants {
    pub fn new(c1: f64, c2: f64) -> Result<Self, MetricError> {
        if c1 > 0.0 && c2 > 0.0 {
            Ok(Self { c1, c2 })
        } else {
            Err(MetricError::InvalidConstants)
        }
    }
}

impl Default for SsimConstants {
    /// `(0.01 * 255)^2` and `(0.03 * 255)^2`.
    fn default() -> Self {
        Self {
            c1: 6.5025,
            c2: 58.5225,
        }
    }
}

/// How candidate regions are scored against the original.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub alpha: f64,
    pub consts: SsimConstants,
    pub tile: usize,
}

impl Default for Objective {
    fn default() -> Self {
        Self {
            alpha: DEFAULT_ALPHA,
            consts: SsimConstants::default(),
            tile: DEFAULT_SSIM_TILE,
        }
    }
}

impl Objective {
    pub fn with_alpha(alpha: f64) -> Result<Self, MetricError> {
        check_alpha(alpha)?;
        Ok(Self {
            alpha,
            ..Self::default()
        })
    }

    /// Highest attainable Z: SSIM 1 and capped PSNR.
    pub fn ceiling(&self) -> f64 {
        combine(self.alpha, 1.0, PSNR_INFINITE)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct QualityReport {
    pub mse: f64,
    pub psnr_db: f64,
    pub ssim: f64,
    pub z: f64,
}

fn check_dims(a: &PixelGrid, b: &PixelGrid) -> Result<(), MetricError> {
    if a.same_dims(b) {
        Ok(())
    } else {
        Err(MetricError::DimensionMismatch(
            a.width(),
            a.height(),
            b.width(),
            b.height(),
        ))
    }
}

fn check_alpha(alpha: f64) -> Result<(), MetricError> {
    if (0.0..=1.0).contains(&alpha) {
        Ok(())
    } else {
        Err(MetricError::InvalidAlpha(alpha))
    }
}

pub fn mse(a: &PixelGrid, b: &PixelGrid) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let n = a.samples().len();
    if n == 0 {
        return Ok(0.0);
    }
    let sse: u64 = a
        .samples()
        .iter()
        .zip(b.samples())
        .map(|(&x, &y)| {
            let d = x as i64 - y as i64;
            (d * d) as u64
        })
        .sum();
    Ok(sse as f64 / n as f64)
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse == 0.0 {
        PSNR_INFINITE
    } else {
        10.0 * (MAX_INTENSITY * MAX_INTENSITY / mse).log10()
    }
}

pub fn psnr(a: &PixelGrid, b: &PixelGrid) -> Result<f64, MetricError> {
    mse(a, b).map(psnr_from_mse)
}

/// Single-window SSIM over two equally long sample slices.
pub fn ssim_samples(a: &[u8], b: &[u8], consts: SsimConstants) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mean = |s: &[u8]| s.iter().map(|&v| v as f64).sum::<f64>() / n;
    let (mu_a, mu_b) = (mean(a), mean(b));
    let (mut var_a, mut var_b, mut cov) = (0.0, 0.0, 0.0);
    for (&x, &y) in a.iter().zip(b) {
        let dx = x as f64 - mu_a;
        let dy = y as f64 - mu_b;
        var_a += dx * dx;
        var_b += dy * dy;
        cov += dx * dy;
    }
    let (var_a, var_b, cov) = (var_a / n, var_b / n, cov / n);
    let SsimConstants { c1, c2 } = consts;
    ((2.0 * (mu_a * mu_b) + c1) * (2.0 * cov + c2))
        / ((mu_a * mu_a + mu_b * mu_b + c1) * (var_a + var_b + c2))
}

/// SSIM with the whole extent of both grids as one window.
pub fn ssim(a: &PixelGrid, b: &PixelGrid, consts: SsimConstants) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    if a.samples().is_empty() {
        return Ok(1.0);
    }
    Ok(ssim_samples(a.samples(), b.samples(), consts))
}

/// Mean single-window SSIM over non-overlapping `tile`×`tile` windows; the
/// border remainder is ignored. When not even one whole tile fits, the whole
/// extent is used as a single window.
pub fn ssim_global(
    a: &PixelGrid,
    b: &PixelGrid,
    consts: SsimConstants,
    tile: usize,
) -> Result<f64, MetricError> {
    check_dims(a, b)?;
    let (w, h) = (a.width(), a.height());
    if tile == 0 || tile > w || tile > h {
        return ssim(a, b, consts);
    }
    let mut wa = Vec::with_capacity(tile * tile);
    let mut wb = Vec::with_capacity(tile * tile);
    let mut total = 0.0;
    let mut count = 0usize;
    for ty in 0..h / tile {
        for tx in 0..w / tile {
            wa.clear();
            wb.clear();
            for y in ty * tile..(ty + 1) * tile {
                let row = y * w + tx * tile;
                wa.extend_from_slice(&a.samples()[row..row + tile]);
                wb.extend_from_slice(&b.samples()[row..row + tile]);
            }
            total += ssim_samples(&wa, &wb, consts);
            count += 1;
        }
    }
    Ok(total / count as f64)
}

/// `alpha * ssim + (1 - alpha) * min(psnr, PSNR_CAP)`.
pub fn combine(alpha: f64, ssim: f64, psnr_db: f64) -> f64 {
    alpha * ssim + (1.0 - alpha) * psnr_db.min(PSNR_CAP)
}

pub fn fitness_z(
    candidate: &PixelGrid,
    original: &PixelGrid,
    alpha: f64,
) -> Result<f64, MetricError> {
    let objective = Objective::with_alpha(alpha)?;
    fitness_with(candidate, original, &objective)
}

pub fn fitness_with(
    candidate: &PixelGrid,
    original: &PixelGrid,
    objective: &Objective,
) -> Result<f64, MetricError> {
    check_alpha(objective.alpha)?;
    let s = ssim_global(candidate, original, objective.consts, objective.tile)?;
    let p = psnr(candidate, original)?;
    Ok(combine(objective.alpha, s, p))
}

pub fn quality_report(
    original: &PixelGrid,
    candidate: &PixelGrid,
    objective: &Objective,
) -> Result<QualityReport, MetricError> {
    check_alpha(objective.alpha)?;
    let mse = mse(original, candidate)?;
    let psnr_db = psnr_from_mse(mse);
    let ssim = ssim_global(original, candidate, objective.consts, objective.tile)?;
    Ok(QualityReport {
        mse,
        psnr_db,
        ssim,
        z: combine(objective.alpha, ssim, psnr_db),
    })
}
