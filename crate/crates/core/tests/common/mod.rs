#![allow(dead_code)]

use nestegg::image_io::{nest_layout, NestIndex, PixelGrid};
use nestegg::rng::SplitMix64;
use nestegg::StegoKey;

pub fn random_grid(w: usize, h: usize, rng: &mut SplitMix64) -> PixelGrid {
    PixelGrid::from_fn(w, h, |_, _| rng.next_u64() as u8)
}

pub fn random_bytes(len: usize, rng: &mut SplitMix64) -> Vec<u8> {
    (0..len).map(|_| rng.next_u64() as u8).collect()
}

/// Stego and cover must have equal dimensions and may differ only in the
/// low `k` bits of pixels that lie inside nests named by the key.
pub fn check_locality(cover: &PixelGrid, stego: &PixelGrid, key: &StegoKey) -> Result<(), String> {
    if (cover.width(), cover.height()) != (stego.width(), stego.height()) {
        return Err(format!(
            "dimensions changed: {}x{} -> {}x{}",
            cover.width(),
            cover.height(),
            stego.width(),
            stego.height()
        ));
    }
    let n = key.nest_size as usize;
    let (_, cols) = nest_layout(cover, n);
    let planned: Vec<NestIndex> = key
        .plans
        .iter()
        .map(|p| NestIndex::from_raster(p.nest_index as usize, cols, n))
        .collect();
    let high = !((1u16 << key.k) - 1) as u8;
    for y in 0..cover.height() {
        for x in 0..cover.width() {
            let (c, s) = (cover.get(x, y), stego.get(x, y));
            if c == s {
                continue;
            }
            if (c ^ s) & high != 0 {
                return Err(format!(
                    "pixel ({x},{y}) changed above bit {}: {c} -> {s}",
                    key.k
                ));
            }
            if !planned.iter().any(|nest| nest.contains(x, y)) {
                return Err(format!("pixel ({x},{y}) changed outside planned nests"));
            }
        }
    }
    Ok(())
}

/// Reference Z for a window small enough to be a single SSIM window:
/// population statistics, `c1 = (0.01*255)^2`, `c2 = (0.03*255)^2`, PSNR
/// capped at 100 dB.
pub fn oracle_z(candidate: &[u8], original: &[u8], alpha: f64) -> f64 {
    let n = candidate.len() as f64;
    let c1 = 6.5025;
    let c2 = 58.5225;
    let xs: Vec<f64> = candidate.iter().map(|&v| v as f64).collect();
    let ys: Vec<f64> = original.iter().map(|&v| v as f64).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let vx = xs.iter().map(|x| (x - mx).powi(2)).sum::<f64>() / n;
    let vy = ys.iter().map(|y| (y - my).powi(2)).sum::<f64>() / n;
    let cxy = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - mx) * (y - my))
        .sum::<f64>()
        / n;
    let ssim =
        (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
    let mse = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        / n;
    let psnr = if mse == 0.0 {
        100.0
    } else {
        (10.0 * (65025.0 / mse).log10()).min(100.0)
    };
    alpha * ssim + (1.0 - alpha) * psnr
}

/// All permutations of `0..n` in lexicographic order.
pub fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, rest: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let v = rest.remove(i);
            prefix.push(v);
            go(prefix, rest, out);
            prefix.pop();
            rest.insert(i, v);
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut (0..n).collect(), &mut out);
    out
}
