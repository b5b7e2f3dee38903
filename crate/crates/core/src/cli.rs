//! Command-line front end.
//!
//! Exit codes: 0 success, 1 payload exceeds capacity, 2 I/O or format error,
//! 3 bad flags or arguments, 4 CRC mismatch on extraction.

use std::ffi::OsString;
use std::fs::{self, File};
use std::io::BufWriter;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::bench::{self, BenchConfig, BenchError, BenchImage};
use crate::cuckoo::{self, CsParams, CuckooError};
use crate::image_io::{self, ImageError};
use crate::klsb::KlsbError;
use crate::metrics::{self, Objective, QualityReport};
use crate::mp3;
use crate::stego::{self, EmbedConfig, EmbedMode, StegoError, StegoKey};

pub const EXIT_CAPACITY: u8 = 1;
pub const EXIT_IO: u8 = 2;
pub const EXIT_USAGE: u8 = 3;
pub const EXIT_CRC: u8 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "nestegg",
    version,
    about = "k-LSB image steganography with cuckoo-search pixel ordering"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Hide a payload in a grayscale cover image.
    Embed(EmbedArgs),
    /// Recover a payload using its stego key.
    Extract(ExtractArgs),
    /// Report MSE, PSNR, SSIM and Z between two images.
    Analyze(AnalyzeArgs),
    /// Compare sequential and cuckoo embedding over several seeds.
    Bench(BenchArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ModeArg {
    Cuckoo,
    Sequential,
}

impl From<ModeArg> for EmbedMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Cuckoo => EmbedMode::Cuckoo,
            ModeArg::Sequential => EmbedMode::Sequential,
        }
    }
}

#[derive(Debug, Args)]
struct SearchArgs {
    /// Bits replaced per pixel.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u8).range(1..=8))]
    k: u8,
    #[arg(long = "nest-size", default_value_t = 16)]
    nest_size: usize,
    /// SSIM weight in the fitness Z.
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
    /// Fraction of worst eggs abandoned each generation.
    #[arg(long, default_value_t = 0.25)]
    pa: f64,
    /// Lévy exponent.
    #[arg(long, default_value_t = 1.5)]
    lambda: f64,
    /// Lévy step scale.
    #[arg(long = "step", default_value_t = 1.0)]
    alpha_step: f64,
    #[arg(long, default_value_t = 15)]
    pop: usize,
    #[arg(long, default_value_t = 200)]
    gens: usize,
    /// Stop a nest after this many generations without improvement.
    #[arg(long, default_value_t = 40)]
    patience: usize,
}

impl SearchArgs {
    fn resolve(&self, seed: u64) -> Result<(Objective, CsParams), Failure> {
        let objective =
            Objective::with_alpha(self.alpha).map_err(|e| Failure::usage(e.to_string()))?;
        let params = CsParams {
            population: self.pop,
            p_a: self.pa,
            alpha_step: self.alpha_step,
            lambda: self.lambda,
            max_generations: self.gens,
            patience: self.patience,
            master_seed: seed,
            ..CsParams::default()
        };
        params
            .validate()
            .map_err(|e| Failure::usage(e.to_string()))?;
        if self.nest_size < 2 || self.nest_size > u16::MAX as usize {
            return Err(Failure::usage(format!(
                "--nest-size must be in 2..=65535, got {}",
                self.nest_size
            )));
        }
        Ok((objective, params))
    }
}

#[derive(Debug, Args)]
struct EmbedArgs {
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    payload: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    key: PathBuf,
    /// Require the payload to parse as an MP3 file.
    #[arg(long)]
    mp3: bool,
    #[arg(long, value_enum, default_value_t = ModeArg::Cuckoo)]
    mode: ModeArg,
    #[command(flatten)]
    search: SearchArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Write per-generation best fitness of every nest as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExtractArgs {
    #[arg(long)]
    stego: PathBuf,
    #[arg(long)]
    key: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Re-parse the recovered bytes as MP3 and report the frame count.
    #[arg(long = "validate-mp3")]
    validate_mp3: bool,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    cover: PathBuf,
    #[arg(long)]
    stego: PathBuf,
    #[arg(long, default_value_t = 0.5)]
    alpha: f64,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Cover images; two synthetic covers are generated when omitted.
    #[arg(long, num_args = 1..)]
    images: Vec<PathBuf>,
    /// Payload size; defaults to a quarter of each image's capacity.
    #[arg(long = "payload-bytes")]
    payload_bytes: Option<usize>,
    #[arg(long, default_value_t = 5)]
    seeds: u64,
    #[arg(long)]
    out: PathBuf,
    #[command(flatten)]
    search: SearchArgs,
    /// Fill the wall_time_ms column (otherwise 0, keeping output reproducible).
    #[arg(long = "record-time")]
    record_time: bool,
}

#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }

    fn io(path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_IO, format!("{}: {e}", path.display()))
    }
}

fn stego_exit_code(e: &StegoError) -> u8 {
    match e {
        StegoError::Capacity { .. } | StegoError::PayloadTooLarge(_) => EXIT_CAPACITY,
        StegoError::CrcMismatch { .. } => EXIT_CRC,
        StegoError::NestSizeTooLarge(_)
        | StegoError::Metric(_)
        | StegoError::Klsb(KlsbError::InvalidK(_))
        | StegoError::Image(ImageError::InvalidNestSize(_))
        | StegoError::Cuckoo(CuckooError::InvalidParams(_) | CuckooError::InvalidLambda(_)) => {
            EXIT_USAGE
        }
        _ => EXIT_IO,
    }
}

impl From<StegoError> for Failure {
    fn from(e: StegoError) -> Self {
        Self::new(stego_exit_code(&e), e.to_string())
    }
}

impl From<BenchError> for Failure {
    fn from(e: BenchError) -> Self {
        let code = match &e {
            BenchError::NoSeeds => EXIT_USAGE,
            BenchError::Embed { source, .. } => stego_exit_code(source),
            _ => EXIT_IO,
        };
        Self::new(code, e.to_string())
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let outcome = match cli.command {
        Command::Embed(a) => cmd_embed(a),
        Command::Extract(a) => cmd_extract(a),
        Command::Analyze(a) => cmd_analyze(a),
        Command::Bench(a) => cmd_bench(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn print_report(r: &QualityReport) {
    println!("mse={}", r.mse);
    println!("psnr_db={}", r.psnr_db);
    println!("ssim={}", r.ssim);
    println!("z={}", r.z);
}

fn load(path: &PathBuf) -> Result<image_io::PixelGrid, Failure> {
    image_io::load_image(path).map_err(|e| Failure::io(path, e))
}

fn cmd_embed(a: EmbedArgs) -> Result<(), Failure> {
    let (objective, search) = a.search.resolve(a.seed)?;
    let cover = load(&a.cover)?;
    let payload = fs::read(&a.payload).map_err(|e| Failure::io(&a.payload, e))?;
    let config = EmbedConfig {
        k: a.search.k,
        nest_size: a.search.nest_size,
        objective,
        search,
        mode: a.mode.into(),
    };
    let result = if a.mp3 {
        stego::embed_mp3(&cover, &payload, &config)?
    } else {
        stego::embed(&cover, &payload, &config)?
    };
    image_io::save_image(&result.stego, &a.out).map_err(|e| Failure::io(&a.out, e))?;
    result
        .key
        .save(&a.key)
        .map_err(|e| Failure::io(&a.key, e))?;
    if let Some(path) = &a.trace {
        let file = File::create(path).map_err(|e| Failure::io(path, e))?;
        cuckoo::write_trace_csv(&result.trace, BufWriter::new(file))
            .map_err(|e| Failure::io(path, e))?;
    }
    println!("payload_bytes={}", payload.len());
    println!("nests_used={}", result.key.plans.len());
    if let Some(frames) = result.mp3_frames {
        println!("mp3_frames={frames}");
    }
    print_report(&result.report);
    Ok(())
}

fn cmd_extract(a: ExtractArgs) -> Result<(), Failure> {
    let stego_grid = load(&a.stego)?;
    let key = StegoKey::load(&a.key).map_err(|e| match e {
        StegoError::Io(io) => Failure::io(&a.key, io),
        other => Failure::new(EXIT_IO, format!("{}: {other}", a.key.display())),
    })?;
    let payload = stego::extract(&stego_grid, &key)?;
    fs::write(&a.out, &payload).map_err(|e| Failure::io(&a.out, e))?;
    println!("payload_bytes={}", payload.len());
    if a.validate_mp3 {
        let report = mp3::validate_extracted(&payload, None);
        println!("mp3_valid={}", report.valid);
        println!("mp3_frames={}", report.frame_count);
        println!("mp3_gaps={}", report.gaps.len());
    }
    Ok(())
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<(), Failure> {
    let objective = Objective::with_alpha(a.alpha).map_err(|e| Failure::usage(e.to_string()))?;
    let cover = load(&a.cover)?;
    let stego_grid = load(&a.stego)?;
    // mismatched dimensions are a usage error, not a format error
    let report = metrics::quality_report(&cover, &stego_grid, &objective)
        .map_err(|e| Failure::usage(e.to_string()))?;
    print_report(&report);
    Ok(())
}

fn cmd_bench(a: BenchArgs) -> Result<(), Failure> {
    let (objective, search) = a.search.resolve(0)?;
    if a.seeds == 0 {
        return Err(Failure::usage("--seeds must be at least 1"));
    }
    let images = if a.images.is_empty() {
        BenchImage::synthetic_pair()
    } else {
        a.images
            .iter()
            .map(|p| BenchImage::load(p))
            .collect::<Result<Vec<_>, _>>()?
    };
    let config = BenchConfig {
        payload_bytes: a.payload_bytes,
        k: a.search.k,
        seeds: a.seeds,
        nest_size: a.search.nest_size,
        objective,
        search,
        record_time: a.record_time,
    };
    let rows = bench::run(&images, &config)?;
    let file = File::create(&a.out).map_err(|e| Failure::io(&a.out, e))?;
    bench::write_csv(&rows, BufWriter::new(file))?;
    let summary = bench::format_summary(&bench::summarize(&rows));
    let summary_path = bench::summary_path(&a.out);
    fs::write(&summary_path, &summary).map_err(|e| Failure::io(&summary_path, e))?;
    print!("{summary}");
    Ok(())
}
