//! Cuckoo search over intra-nest pixel orders.
//!
//! An egg is a seeded [`PixelOrder`] together with the fitness Z of the nest
//! it produces. One generation:
//!
//! 1. every egg lays a cuckoo: a Lévy step (Mantegna) is drawn, mapped to a
//!    transposition count `m = clamp(ceil(|step| * alpha_step), 1, min(n/2, 64))`,
//!    and `m` distinct seed bits of the egg are flipped. The cuckoo replaces a
//!    uniformly chosen egg if strictly fitter;
//! 2. the `ceil(p_a * population)` least fit eggs are abandoned and replaced
//!    by fresh random orders.
//!
//! The search stops after `max_generations`, when the best fitness has
//! improved by less than `epsilon` for `patience` consecutive generations, or
//! when the zero-distortion ceiling is reached. The identity order is always
//! part of the initial population.

use std::io::Write;

use rayon::prelude::*;
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::image_io::{NestIndex, PixelGrid};
use crate::klsb::{self, BitChunk, KlsbError, PixelOrder, SwapSchedule, SCHEDULE_LEN};
use crate::metrics::{combine, psnr_from_mse, Objective};
use crate::rng::SplitMix64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CuckooError {
    #[error("invalid search parameters: {0}")]
    InvalidParams(String),
    #[error("Lévy exponent must lie in (1, 3], got {0}")]
    InvalidLambda(f64),
    #[error(transparent)]
    Klsb(#[from] KlsbError),
    #[error("{chunks} chunks do not fit into {nests} nests")]
    TooManyChunks { chunks: usize, nests: usize },
    #[error("pixel order has no seed")]
    UnseededOrder,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CsParams {
    pub population: usize,
    pub p_a: f64,
    pub alpha_step: f64,
    pub lambda: f64,
    pub max_generations: usize,
    pub epsilon: f64,
    pub patience: usize,
    pub master_seed: u64,
}

impl Default for CsParams {
    fn default() -> Self {
        Self {
            population: 15,
            p_a: 0.25,
            alpha_step: 1.0,
            lambda: 1.5,
            max_generations: 200,
            epsilon: 1e-9,
            patience: 40,
            master_seed: 0,
        }
    }
}

impl CsParams {
    pub fn validate(&self) -> Result<(), CuckooError> {
        if self.population < 2 {
            return Err(CuckooError::InvalidParams(
                "population must be at least 2".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.p_a) {
            return Err(CuckooError::InvalidParams(format!(
                "p_a {} outside [0, 1]",
                self.p_a
            )));
        }
        if !(self.alpha_step > 0.0 && self.alpha_step.is_finite()) {
            return Err(CuckooError::InvalidParams(
                "alpha_step must be positive".into(),
            ));
        }
        if self.epsilon.is_nan() || self.epsilon < 0.0 {
            return Err(CuckooError::InvalidParams(
                "epsilon must be non-negative".into(),
            ));
        }
        check_lambda(self.lambda)
    }

    /// Eggs abandoned per generation.
    pub fn abandon_count(&self) -> usize {
        // guard against 0.1 * 30 = 3.0000000000000004
        ((self.p_a * self.population as f64) - 1e-9).ceil().max(0.0) as usize
    }
}

fn check_lambda(lambda: f64) -> Result<(), CuckooError> {
    if lambda > 1.0 && lambda <= 3.0 {
        Ok(())
    } else {
        Err(CuckooError::InvalidLambda(lambda))
    }
}

/// Scale of the numerator Gaussian in Mantegna's construction.
pub fn mantegna_sigma(lambda: f64) -> f64 {
    let num = gamma(1.0 + lambda) * (std::f64::consts::PI * lambda / 2.0).sin();
    let den = gamma((1.0 + lambda) / 2.0) * lambda * 2f64.powf((lambda - 1.0) / 2.0);
    (num / den).powf(1.0 / lambda)
}

/// Heavy-tailed step `u / |v|^(1/lambda)`, `u ~ N(0, sigma^2)`, `v ~ N(0, 1)`.
pub fn levy_step(lambda: f64, rng: &mut SplitMix64) -> Result<f64, CuckooError> {
    check_lambda(lambda)?;
    Ok(levy_with_sigma(lambda, mantegna_sigma(lambda), rng))
}

fn levy_with_sigma(lambda: f64, sigma: f64, rng: &mut SplitMix64) -> f64 {
    let u = rng.gaussian() * sigma;
    let v = rng.gaussian();
    u / v.abs().powf(1.0 / lambda)
}

/// Transpositions applied for a Lévy step on a nest of `len` pixels.
pub fn transposition_count(step: f64, alpha_step: f64, len: usize) -> usize {
    let upper = (len / 2).clamp(1, SCHEDULE_LEN);
    let raw = (step.abs() * alpha_step).ceil();
    if raw.is_nan() || raw < 1.0 {
        1
    } else if raw >= upper as f64 {
        upper
    } else {
        raw as usize
    }
}

fn flip_seed_bits(seed: u64, m: usize, rng: &mut SplitMix64) -> u64 {
    let mut positions: [u8; SCHEDULE_LEN] = std::array::from_fn(|i| i as u8);
    let mut out = seed;
    for i in 0..m.min(SCHEDULE_LEN) {
        let j = i + rng.below_usize(SCHEDULE_LEN - i);
        positions.swap(i, j);
        out ^= 1u64 << positions[i];
    }
    out
}

/// Applies `m` random transpositions (see module docs) to a seeded order.
pub fn perturb_order(
    order: &PixelOrder,
    step: f64,
    alpha_step: f64,
    rng: &mut SplitMix64,
) -> Result<PixelOrder, CuckooError> {
    let seed = order.seed().ok_or(CuckooError::UnseededOrder)?;
    let m = transposition_count(step, alpha_step, order.len());
    let new_seed = flip_seed_bits(seed, m, rng);
    Ok(PixelOrder::from_seed(new_seed, order.len())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Egg {
    pub order: PixelOrder,
    pub fitness: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NestOutcome {
    pub best: Egg,
    /// Best-so-far fitness after initialization and after each generation.
    pub history: Vec<f64>,
    pub generations: usize,
    pub abandoned: usize,
    pub evaluations: usize,
}

/// Scores candidate orders for one nest and one chunk without allocating.
struct NestEvaluator<'a> {
    cover: &'a [u8],
    groups: Vec<u8>,
    k: u8,
    objective: Objective,
    /// Tile of each pixel, or `usize::MAX` when it lies in no SSIM window.
    tile_of: Vec<usize>,
    tile_pixels: u64,
    cover_sum: Vec<u64>,
    cover_sq: Vec<u64>,
    stego: Vec<u8>,
    perm: Vec<u32>,
    sum: Vec<u64>,
    sq: Vec<u64>,
    cross: Vec<u64>,
}

impl<'a> NestEvaluator<'a> {
    fn new(block: &'a PixelGrid, chunk: &BitChunk, k: u8, objective: Objective) -> Self {
        let (w, h) = (block.width(), block.height());
        let tile = objective.tile;
        let (tiles_x, tiles_y, tile_side) = if tile == 0 || tile > w || tile > h {
            (1, 1, None)
        } else {
            (w / tile, h / tile, Some(tile))
        };
        let tile_of: Vec<usize> = (0..w * h)
            .map(|i| match tile_side {
                None => 0,
                Some(t) => {
                    let (x, y) = (i % w, i / w);
                    if x < tiles_x * t && y < tiles_y * t {
                        (y / t) * tiles_x + x / t
                    } else {
                        usize::MAX
                    }
                }
            })
            .collect();
        let tiles = tiles_x * tiles_y;
        let tile_pixels = tile_side.map_or((w * h) as u64, |t| (t * t) as u64);
        let mut cover_sum = vec![0u64; tiles];
        let mut cover_sq = vec![0u64; tiles];
        for (&c, &t) in block.samples().iter().zip(&tile_of) {
            if t != usize::MAX {
                cover_sum[t] += c as u64;
                cover_sq[t] += (c as u64) * (c as u64);
            }
        }
        Self {
            cover: block.samples(),
            groups: chunk.groups(k),
            k,
            objective,
            tile_of,
            tile_pixels,
            cover_sum,
            cover_sq,
            stego: vec![0; w * h],
            perm: Vec::with_capacity(w * h),
            sum: vec![0; tiles],
            sq: vec![0; tiles],
            cross: vec![0; tiles],
        }
    }

    fn evaluate(&mut self, schedule: &SwapSchedule, seed: u64) -> f64 {
        schedule.fill(seed, &mut self.perm);
        for (&pixel, &group) in self.perm.iter().zip(&self.groups) {
            let p = pixel as usize;
            self.stego[p] = klsb::mutate_value(self.cover[p], group, self.k);
        }
        self.sum.fill(0);
        self.sq.fill(0);
        self.cross.fill(0);
        let mut sse = 0u64;
        for ((&c, &s), &t) in self.cover.iter().zip(&self.stego).zip(&self.tile_of) {
            let d = c as i64 - s as i64;
            sse += (d * d) as u64;
            if t != usize::MAX {
                let (c, s) = (c as u64, s as u64);
                self.sum[t] += s;
                self.sq[t] += s * s;
                self.cross[t] += c * s;
            }
        }
        let n = self.tile_pixels as f64;
        let nn = self.tile_pixels as i128;
        let consts = self.objective.consts;
        let mut ssim_total = 0.0;
        for t in 0..self.sum.len() {
            let (sc, ss) = (self.cover_sum[t] as i128, self.sum[t] as i128);
            let var_c = (nn * self.cover_sq[t] as i128 - sc * sc) as f64 / (n * n);
            let var_s = (nn * self.sq[t] as i128 - ss * ss) as f64 / (n * n);
            let cov = (nn * self.cross[t] as i128 - sc * ss) as f64 / (n * n);
            let (mu_c, mu_s) = (sc as f64 / n, ss as f64 / n);
            ssim_total += ((2.0 * mu_c * mu_s + consts.c1) * (2.0 * cov + consts.c2))
                / ((mu_c * mu_c + mu_s * mu_s + consts.c1) * (var_c + var_s + consts.c2));
        }
        let ssim = ssim_total / self.sum.len() as f64;
        let mse = sse as f64 / self.cover.len() as f64;
        combine(self.objective.alpha, ssim, psnr_from_mse(mse))
    }
}

#[derive(Clone, Copy)]
struct SeedEgg {
    seed: u64,
    fitness: f64,
}

fn fitter(a: SeedEgg, b: SeedEgg) -> bool {
    a.fitness > b.fitness || (a.fitness == b.fitness && a.seed < b.seed)
}

/// Runs cuckoo search for one nest and one chunk.
pub fn optimize_nest(
    block: &PixelGrid,
    chunk: &BitChunk,
    k: u8,
    params: &CsParams,
    objective: &Objective,
    rng: &mut SplitMix64,
) -> Result<NestOutcome, CuckooError> {
    klsb::check_k(k)?;
    params.validate()?;
    let n = block.samples().len();
    if chunk.len() != k as usize * n {
        return Err(KlsbError::LengthMismatch {
            expected: k as usize * n,
            actual: chunk.len(),
        }
        .into());
    }
    let schedule = SwapSchedule::new(n)?;
    let mut eval = NestEvaluator::new(block, chunk, k, *objective);
    let ceiling = objective.ceiling();
    let sigma = mantegna_sigma(params.lambda);
    let mut evaluations = 0usize;
    let mut score = |seed: u64, evaluations: &mut usize| {
        *evaluations += 1;
        SeedEgg {
            seed,
            fitness: eval.evaluate(&schedule, seed),
        }
    };

    let mut eggs: Vec<SeedEgg> = (0..params.population)
        .map(|i| {
            let seed = if i == 0 { 0 } else { rng.next_u64() };
            score(seed, &mut evaluations)
        })
        .collect();
    let mut best = eggs
        .iter()
        .copied()
        .reduce(|a, b| if fitter(b, a) { b } else { a })
        .expect("population >= 2");
    let mut history = vec![best.fitness];
    let abandon = params.abandon_count().min(params.population);
    let mut abandoned = 0usize;
    let mut generations = 0usize;
    let mut stagnant = 0usize;

    while generations < params.max_generations && best.fitness < ceiling {
        generations += 1;
        let before = best.fitness;

        for i in 0..params.population {
            let step = levy_with_sigma(params.lambda, sigma, rng);
            let m = transposition_count(step, params.alpha_step, n);
            let cuckoo = score(flip_seed_bits(eggs[i].seed, m, rng), &mut evaluations);
            let j = rng.below_usize(params.population);
            if cuckoo.fitness > eggs[j].fitness {
                eggs[j] = cuckoo;
            }
            if fitter(cuckoo, best) {
                best = cuckoo;
            }
        }

        if abandon > 0 {
            let mut ranked: Vec<usize> = (0..params.population).collect();
            ranked.sort_by(|&a, &b| {
                if fitter(eggs[a], eggs[b]) {
                    std::cmp::Ordering::Greater
                } else if fitter(eggs[b], eggs[a]) {
                    std::cmp::Ordering::Less
                } else {
                    a.cmp(&b)
                }
            });
            for &slot in &ranked[..abandon] {
                let fresh = score(rng.next_u64(), &mut evaluations);
                eggs[slot] = fresh;
                if fitter(fresh, best) {
                    best = fresh;
                }
            }
            abandoned += abandon;
        }

        history.push(best.fitness);
        if best.fitness - before < params.epsilon {
            stagnant += 1;
            if stagnant >= params.patience {
                break;
            }
        } else {
            stagnant = 0;
        }
    }

    Ok(NestOutcome {
        best: Egg {
            order: schedule.order(best.seed),
            fitness: best.fitness,
        },
        history,
        generations,
        abandoned,
        evaluations,
    })
}

/// One nest handed to [`optimize_image`], with its raster ordinal.
#[derive(Debug, Clone)]
pub struct NestBlock {
    pub raster_index: usize,
    pub nest: NestIndex,
    pub block: PixelGrid,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChunkPlan {
    pub chunk_index: usize,
    pub nest_index: usize,
    pub order_seed: u64,
    pub fitness: f64,
}

#[derive(Debug, Clone)]
pub struct NestRun {
    pub raster_index: usize,
    pub provisional_chunk: usize,
    pub outcome: NestOutcome,
}

#[derive(Debug, Clone)]
pub struct ImagePlan {
    /// One plan per chunk, ordered by chunk index.
    pub plans: Vec<ChunkPlan>,
    /// Every optimized nest, in input order.
    pub runs: Vec<NestRun>,
}

/// Places chunks into nests.
///
/// Nest `j` of the input list is optimized against provisional chunk
/// `j mod chunks.len()`, each with its own random stream derived from
/// `(master_seed, raster_index)`. Nests are then visited by descending best
/// fitness (ties by raster index) and each one whose provisional chunk is
/// still unplaced receives it. With as many chunks as nests this is the
/// identity assignment over raster order.
pub fn optimize_image(
    nest_blocks: &[NestBlock],
    chunks: &[BitChunk],
    k: u8,
    params: &CsParams,
    objective: &Objective,
) -> Result<ImagePlan, CuckooError> {
    params.validate()?;
    if chunks.len() > nest_blocks.len() {
        return Err(CuckooError::TooManyChunks {
            chunks: chunks.len(),
            nests: nest_blocks.len(),
        });
    }
    if chunks.is_empty() {
        return Ok(ImagePlan {
            plans: Vec::new(),
            runs: Vec::new(),
        });
    }
    let runs: Vec<NestRun> = nest_blocks
        .par_iter()
        .enumerate()
        .map(|(j, nb)| {
            let provisional_chunk = j % chunks.len();
            let mut rng = SplitMix64::stream(params.master_seed, nb.raster_index as u64);
            optimize_nest(
                &nb.block,
                &chunks[provisional_chunk],
                k,
                params,
                objective,
                &mut rng,
            )
            .map(|outcome| NestRun {
                raster_index: nb.raster_index,
                provisional_chunk,
                outcome,
            })
        })
        .collect::<Result<_, _>>()?;

    let mut ranked: Vec<&NestRun> = runs.iter().collect();
    ranked.sort_by(|a, b| {
        b.outcome
            .best
            .fitness
            .total_cmp(&a.outcome.best.fitness)
            .then(a.raster_index.cmp(&b.raster_index))
    });
    let mut plans: Vec<Option<ChunkPlan>> = vec![None; chunks.len()];
    for run in ranked {
        let slot = &mut plans[run.provisional_chunk];
        if slot.is_none() {
            *slot = Some(ChunkPlan {
                chunk_index: run.provisional_chunk,
                nest_index: run.raster_index,
                order_seed: run
                    .outcome
                    .best
                    .order
                    .seed()
                    .expect("search orders are seeded"),
                fitness: run.outcome.best.fitness,
            });
        }
    }
    Ok(ImagePlan {
        plans: plans
            .into_iter()
            .map(|p| p.expect("every chunk has a nest"))
            .collect(),
        runs,
    })
}

/// Writes `generation,nest_index,best_z` rows for every run.
pub fn write_trace_csv<W: Write>(runs: &[NestRun], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["generation", "nest_index", "best_z"])?;
    for run in runs {
        for (generation, z) in run.outcome.history.iter().enumerate() {
            w.write_record([
                generation.to_string(),
                run.raster_index.to_string(),
                z.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::klsb::{embed_chunk, extract_chunk};
    use crate::metrics::fitness_with;

    fn random_block(n: usize, rng: &mut SplitMix64) -> PixelGrid {
        PixelGrid::from_fn(n, n, |_, _| rng.next_u64() as u8)
    }

    fn random_chunk(len: usize, rng: &mut SplitMix64) -> BitChunk {
        BitChunk::new((0..len).map(|_| (rng.next_u64() & 1) as u8).collect()).unwrap()
    }

    #[test]
    fn evaluator_matches_reference_fitness() {
        let mut rng = SplitMix64::new(4);
        for (n, k, tile) in [(16, 1, 8), (16, 3, 8), (2, 1, 8), (12, 2, 8), (4, 1, 3)] {
            let block = random_block(n, &mut rng);
            let chunk = random_chunk(k as usize * n * n, &mut rng);
            let objective = Objective {
                tile,
                ..Objective::default()
            };
            let schedule = SwapSchedule::new(n * n).unwrap();
            let mut eval = NestEvaluator::new(&block, &chunk, k, objective);
            for _ in 0..20 {
                let seed = rng.next_u64();
                let stego = embed_chunk(&block, &chunk, &schedule.order(seed), k).unwrap();
                let want = fitness_with(&stego, &block, &objective).unwrap();
                let got = eval.evaluate(&schedule, seed);
                assert!((got - want).abs() < 1e-10, "{n} {k}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn mantegna_sigma_value() {
        assert!((mantegna_sigma(1.5) - 0.6965745025576967).abs() < 1e-12);
    }

    #[test]
    fn levy_golden_and_deterministic() {
        // tests/oracles/portable_rng.py
        let want = [1.0869248731802477, -2.127836079481691, -0.5469996506314494];
        let mut rng = SplitMix64::new(2024);
        for w in want {
            assert!((levy_step(1.5, &mut rng).unwrap() - w).abs() < 1e-12);
        }
        let a = levy_step(1.5, &mut SplitMix64::new(5)).unwrap();
        assert_eq!(a, levy_step(1.5, &mut SplitMix64::new(5)).unwrap());
        assert!(levy_step(1.0, &mut SplitMix64::new(5)).is_err());
        assert!(levy_step(3.5, &mut SplitMix64::new(5)).is_err());
    }

    #[test]
    fn levy_tails_are_heavier_than_gaussian() {
        let mut rng = SplitMix64::new(31337);
        let mut draws: Vec<f64> = (0..100_000)
            .map(|_| levy_step(1.5, &mut rng).unwrap().abs())
            .collect();
        draws.sort_by(f64::total_cmp);
        let median = draws[draws.len() / 2];
        let tail = draws.iter().filter(|&&d| d > 5.0 * median).count() as f64 / draws.len() as f64;
        // |N(0,1)|: median 0.6745, P(|Z| > 3.3724) ~ 7.45e-4
        let gaussian_tail =
            statrs::function::erf::erfc(5.0 * 0.674_489_750_196_081_7 / 2f64.sqrt());
        assert!(tail > 10.0 * gaussian_tail, "{tail} vs {gaussian_tail}");
    }

    #[test]
    fn transposition_counts() {
        assert_eq!(transposition_count(0.3, 1.0, 256), 1);
        assert_eq!(transposition_count(0.0, 1.0, 256), 1);
        assert_eq!(transposition_count(-2.5, 1.0, 256), 3);
        assert_eq!(transposition_count(1e9, 1.0, 256), 64);
        assert_eq!(transposition_count(1e9, 1.0, 4), 2);
        assert_eq!(transposition_count(f64::INFINITY, 1.0, 16), 8);
    }

    #[test]
    fn perturbation_from_identity_moves_two_positions() {
        let identity = PixelOrder::identity(64);
        let mut rng = SplitMix64::new(1);
        let next = perturb_order(&identity, 0.2, 1.0, &mut rng).unwrap();
        let moved: Vec<usize> = (0..64).filter(|&i| next.perm()[i] != i).collect();
        assert_eq!(moved.len(), 2);
        let (i, j) = (moved[0], moved[1]);
        assert_eq!((next.perm()[i], next.perm()[j]), (j, i));
        assert_eq!(next.seed().unwrap().count_ones(), 1);
        assert_eq!(
            perturb_order(
                &PixelOrder::from_perm(vec![1, 0]).unwrap(),
                1.0,
                1.0,
                &mut rng
            ),
            Err(CuckooError::UnseededOrder)
        );
    }

    #[test]
    fn perturbed_orders_stay_bijective() {
        let mut rng = SplitMix64::new(8);
        let mut order = PixelOrder::from_seed(rng.next_u64(), 256).unwrap();
        for _ in 0..500 {
            let step = levy_step(1.5, &mut rng).unwrap();
            order = perturb_order(&order, step, 1.0, &mut rng).unwrap();
            let mut sorted = order.perm().to_vec();
            sorted.sort_unstable();
            assert!(sorted.iter().copied().eq(0..256));
            assert_eq!(
                PixelOrder::from_seed(order.seed().unwrap(), 256).unwrap(),
                order
            );
        }
    }

    #[test]
    fn zero_distortion_chunk_hits_ceiling_immediately() {
        let mut rng = SplitMix64::new(12);
        let block = random_block(16, &mut rng);
        let chunk = extract_chunk(&block, &PixelOrder::identity(256), 1).unwrap();
        let objective = Objective::default();
        let out = optimize_nest(
            &block,
            &chunk,
            1,
            &CsParams::default(),
            &objective,
            &mut rng,
        )
        .unwrap();
        assert_eq!(out.best.fitness, objective.ceiling());
        assert_eq!(out.history, vec![objective.ceiling()]);
        assert_eq!(out.generations, 0);
    }

    #[test]
    fn history_is_monotone_and_abandonment_exact() {
        let mut rng = SplitMix64::new(21);
        let block = random_block(16, &mut rng);
        let chunk = random_chunk(256, &mut rng);
        let params = CsParams {
            population: 8,
            max_generations: 60,
            patience: usize::MAX,
            ..CsParams::default()
        };
        let out =
            optimize_nest(&block, &chunk, 1, &params, &Objective::default(), &mut rng).unwrap();
        assert!(out.history.windows(2).all(|w| w[0] <= w[1]));
        assert_eq!(out.generations, 60);
        assert_eq!(out.history.len(), 61);
        assert_eq!(out.abandoned, 60 * 2);
        assert_eq!(out.evaluations, 8 + 60 * (8 + 2));
        let stego = embed_chunk(&block, &chunk, &out.best.order, 1).unwrap();
        let direct = fitness_with(&stego, &block, &Objective::default()).unwrap();
        assert!((direct - out.best.fitness).abs() < 1e-10);
        assert!(out.best.fitness >= out.history[0]);
    }

    #[test]
    fn abandon_counts() {
        let p = |population, p_a| {
            CsParams {
                population,
                p_a,
                ..CsParams::default()
            }
            .abandon_count()
        };
        assert_eq!(p(15, 0.25), 4);
        assert_eq!(p(8, 0.25), 2);
        assert_eq!(p(30, 0.1), 3);
        assert_eq!(p(10, 0.0), 0);
        assert_eq!(p(10, 1.0), 10);
    }

    #[test]
    fn invalid_params_rejected() {
        let block = PixelGrid::filled(2, 2, 0);
        let chunk = BitChunk::new(vec![0; 4]).unwrap();
        let obj = Objective::default();
        let mut rng = SplitMix64::new(0);
        for bad in [
            CsParams {
                population: 1,
                ..CsParams::default()
            },
            CsParams {
                p_a: 1.5,
                ..CsParams::default()
            },
            CsParams {
                alpha_step: 0.0,
                ..CsParams::default()
            },
            CsParams {
                lambda: 1.0,
                ..CsParams::default()
            },
        ] {
            assert!(optimize_nest(&block, &chunk, 1, &bad, &obj, &mut rng).is_err());
        }
        let short = BitChunk::new(vec![0; 3]).unwrap();
        assert!(optimize_nest(&block, &short, 1, &CsParams::default(), &obj, &mut rng).is_err());
    }

    fn blocks_of(grid: &PixelGrid, nest_size: usize) -> Vec<NestBlock> {
        let cols = grid.width() / nest_size;
        crate::image_io::nests(grid, nest_size)
            .unwrap()
            .into_iter()
            .map(|nest| NestBlock {
                raster_index: nest.raster_index(cols),
                nest,
                block: crate::image_io::extract_nest(grid, nest).unwrap(),
            })
            .collect()
    }

    #[test]
    fn matching_nest_is_chosen_for_single_chunk() {
        let mut rng = SplitMix64::new(3);
        let grid = PixelGrid::from_fn(8, 8, |_, _| rng.next_u64() as u8);
        let blocks = blocks_of(&grid, 4);
        let chunk = extract_chunk(&blocks[2].block, &PixelOrder::identity(16), 1).unwrap();
        let params = CsParams {
            max_generations: 20,
            ..CsParams::default()
        };
        let plan = optimize_image(&blocks, &[chunk], 1, &params, &Objective::default()).unwrap();
        assert_eq!(plan.plans.len(), 1);
        assert_eq!(plan.plans[0].nest_index, 2);
        assert_eq!(plan.plans[0].fitness, Objective::default().ceiling());
    }

    #[test]
    fn full_load_is_identity_assignment() {
        let mut rng = SplitMix64::new(5);
        let grid = PixelGrid::from_fn(16, 16, |_, _| rng.next_u64() as u8);
        let blocks = blocks_of(&grid, 4);
        let chunks: Vec<BitChunk> = (0..16).map(|_| random_chunk(16, &mut rng)).collect();
        let params = CsParams {
            max_generations: 10,
            ..CsParams::default()
        };
        let plan = optimize_image(&blocks, &chunks, 1, &params, &Objective::default()).unwrap();
        for (i, p) in plan.plans.iter().enumerate() {
            assert_eq!((p.chunk_index, p.nest_index), (i, i));
        }
        let too_many: Vec<BitChunk> = (0..17).map(|_| random_chunk(16, &mut rng)).collect();
        assert_eq!(
            optimize_image(&blocks, &too_many, 1, &params, &Objective::default()).unwrap_err(),
            CuckooError::TooManyChunks {
                chunks: 17,
                nests: 16
            }
        );
    }

    #[test]
    fn placement_beats_raster_assignment() {
        let objective = Objective::default();
        let params = CsParams {
            max_generations: 40,
            ..CsParams::default()
        };
        for seed in 0..3 {
            let mut rng = SplitMix64::new(100 + seed);
            let grid = PixelGrid::from_fn(64, 64, |_, _| rng.next_u64() as u8);
            let blocks = blocks_of(&grid, 16);
            let chunks: Vec<BitChunk> = (0..4).map(|_| random_chunk(256, &mut rng)).collect();
            let plan = optimize_image(&blocks, &chunks, 1, &params, &objective).unwrap();
            let chosen: f64 = plan.plans.iter().map(|p| p.fitness).sum();
            let raster: f64 = (0..4)
                .map(|i| {
                    let mut r = SplitMix64::stream(params.master_seed, i as u64);
                    optimize_nest(&blocks[i].block, &chunks[i], 1, &params, &objective, &mut r)
                        .unwrap()
                        .best
                        .fitness
                })
                .sum();
            assert!(chosen >= raster, "{chosen} < {raster}");
        }
    }

    #[test]
    fn trace_csv_layout() {
        let mut rng = SplitMix64::new(1);
        let block = random_block(4, &mut rng);
        let chunk = random_chunk(16, &mut rng);
        let params = CsParams {
            max_generations: 2,
            patience: usize::MAX,
            ..CsParams::default()
        };
        let outcome =
            optimize_nest(&block, &chunk, 1, &params, &Objective::default(), &mut rng).unwrap();
        let runs = vec![NestRun {
            raster_index: 7,
            provisional_chunk: 0,
            outcome,
        }];
        let mut buf = Vec::new();
        write_trace_csv(&runs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "generation,nest_index,best_z");
        assert_eq!(lines.len(), 4);
        assert!(lines[3].starts_with("2,7,"));
    }
}
