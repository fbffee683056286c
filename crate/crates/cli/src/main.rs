//! `sphc`: compress, inspect and benchmark unit-norm embedding matrices.

mod commands;

use std::ops::Range;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use sphc::analysis::ReportStyle;
use sphc::codec::Mode;
use sphc::synth::SphereDistribution;

/// Exit status for bad flags.
pub const EXIT_USAGE: u8 = 1;
/// Exit status for invalid or corrupt data.
pub const EXIT_DATA: u8 = 2;
/// Exit status for unreadable or unwritable paths.
pub const EXIT_IO: u8 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "sphc",
    version,
    about = "Spherical-coordinate codec for float32 embeddings"
)]
struct Cli {
    /// Worker threads for chunk and row parallelism (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Emit reports as one flat JSON object instead of key=value lines.
    #[arg(long, global = true, alias = "json-style")]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone)]
pub struct ShapeArg {
    /// Shape of a raw float32 input, as `D` or `N,D` (ignored for .npy files).
    #[arg(long, value_parser = parse_shape)]
    pub shape: Option<(Option<usize>, usize)>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compress an array file into a .sphc container.
    Compress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value_t = sphc::codec::DEFAULT_LEVEL, allow_negative_numbers = true)]
        level: i32,
        /// Rows per independently decodable chunk (0 = one chunk).
        #[arg(long, default_value_t = sphc::codec::DEFAULT_CHUNK_SIZE)]
        chunk_size: usize,
        #[arg(long, default_value = "spherical")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        truncate_bits: u32,
        #[arg(long)]
        store_norms: bool,
        #[arg(long)]
        renormalize: bool,
        #[arg(long, default_value_t = sphc::transform::DEFAULT_NORM_TOLERANCE)]
        norm_tolerance: f64,
        /// Skip decoding the container to report reconstruction error.
        #[arg(long)]
        no_verify: bool,
        #[command(flatten)]
        shape: ShapeArg,
    },
    /// Decode a container (or a row range of it) into an array file.
    Decompress {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
        /// Half-open row range `A..B`.
        #[arg(long, value_parser = parse_rows)]
        rows: Option<Range<usize>>,
    },
    /// Entropy and exponent statistics of the Cartesian and spherical forms.
    Analyze {
        #[arg(long)]
        input: PathBuf,
        /// Only angle columns k with d − k ≥ this count toward concentration.
        #[arg(long, default_value_t = 64)]
        min_tail: usize,
        #[command(flatten)]
        shape: ShapeArg,
    },
    /// Reconstruction error between two arrays.
    Verify {
        #[arg(long)]
        original: PathBuf,
        #[arg(long)]
        candidate: PathBuf,
        /// Random row pairs for the cross-pair dot-product deviation.
        #[arg(long, default_value_t = 10_000)]
        pairs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        shape: ShapeArg,
    },
    /// Write a synthetic unit-norm matrix.
    Gen {
        #[arg(long)]
        dist: SphereDistribution,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 0.0)]
        kappa: f64,
        #[arg(long, default_value_t = 1)]
        clusters: usize,
        #[arg(long, default_value_t = 0.1)]
        density: f64,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Throughput and ratio across compression levels on synthetic data.
    Bench {
        #[arg(long, default_value_t = 768)]
        d: usize,
        /// Raw input size in MB (10^6 bytes).
        #[arg(long, default_value_t = 100.0)]
        size_mb: f64,
        /// Comma-separated compression levels.
        #[arg(long, default_value = "1,3,5,7,9,11,13,15,17,19,21")]
        levels: String,
        #[arg(long, default_value = "spherical")]
        mode: Mode,
        #[arg(long, default_value_t = 0)]
        chunk_size: usize,
        /// Timed runs per level; the fastest is reported.
        #[arg(long, default_value_t = 1)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Dot product of two rows computed directly from stored angles.
    Similarity {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        row_a: usize,
        #[arg(long)]
        row_b: usize,
        /// Also reconstruct both rows and compare with the Cartesian dot.
        #[arg(long)]
        check: bool,
    },
}

fn parse_shape(s: &str) -> Result<(Option<usize>, usize), String> {
    let parts: Vec<&str> = s.split([',', 'x']).map(str::trim).collect();
    let num = |p: &str| {
        p.parse::<usize>()
            .map_err(|_| format!("bad shape component {p:?}"))
    };
    match parts[..] {
        [d] => Ok((None, num(d)?)),
        [n, d] => Ok((Some(num(n)?), num(d)?)),
        _ => Err(format!("shape {s:?} must be D or N,D")),
    }
}

fn parse_rows(s: &str) -> Result<Range<usize>, String> {
    let (a, b) = s
        .split_once("..")
        .ok_or_else(|| format!("row range {s:?} must look like A..B"))?;
    let a = a
        .trim()
        .parse()
        .map_err(|_| format!("bad row index {a:?}"))?;
    let b = b
        .trim()
        .parse()
        .map_err(|_| format!("bad row index {b:?}"))?;
    Ok(a..b)
}

/// Outcome of a failed command: exit status plus diagnostic.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }
}

impl From<sphc::Error> for Failure {
    fn from(e: sphc::Error) -> Self {
        Self {
            code: if e.is_io() { EXIT_IO } else { EXIT_DATA },
            message: e.to_string(),
        }
    }
}

fn run(cli: Cli) -> Result<String, Failure> {
    let style = if cli.json {
        ReportStyle::Json
    } else {
        ReportStyle::Lines
    };
    match cli.command {
        Command::Compress {
            input,
            output,
            level,
            chunk_size,
            mode,
            truncate_bits,
            store_norms,
            renormalize,
            norm_tolerance,
            no_verify,
            shape,
        } => {
            let opts = sphc::codec::CodecOptions {
                mode,
                level,
                chunk_size,
                truncate_bits,
                store_norms,
                renormalize,
                norm_tolerance,
            };
            commands::compress(&input, &output, &opts, shape.shape, !no_verify, style)
        }
        Command::Decompress {
            input,
            output,
            rows,
        } => commands::decompress(&input, &output, rows, style),
        Command::Analyze {
            input,
            min_tail,
            shape,
        } => commands::analyze(&input, shape.shape, min_tail, style),
        Command::Verify {
            original,
            candidate,
            pairs,
            seed,
            shape,
        } => commands::verify(&original, &candidate, shape.shape, pairs, seed, style),
        Command::Gen {
            dist,
            n,
            d,
            kappa,
            clusters,
            density,
            seed,
            output,
        } => {
            let spec = sphc::synth::GenSpec {
                distribution: dist,
                n,
                d,
                kappa,
                clusters,
                density,
                seed,
            };
            commands::gen(&spec, &output, style)
        }
        Command::Bench {
            d,
            size_mb,
            levels,
            mode,
            chunk_size,
            repeats,
            seed,
        } => {
            let levels = commands::parse_levels(&levels)?;
            commands::bench(
                d,
                size_mb,
                &levels,
                mode,
                chunk_size,
                repeats.max(1),
                seed,
                style,
            )
        }
        Command::Similarity {
            input,
            row_a,
            row_b,
            check,
        } => commands::similarity(&input, row_a, row_b, check, style),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Some(threads) = cli.threads {
        if threads == 0 {
            eprintln!("error: --threads must be at least 1");
            return ExitCode::from(EXIT_USAGE);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE);
        }
    }
    match run(cli) {
        Ok(report) => {
            print!("{report}");
            ExitCode::SUCCESS
        }
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
