use std::fs;
use std::ops::Range;
use std::path::Path;
use std::time::{Duration, Instant};

use sphc::analysis::{self, KeyValues, ReportStyle};
use sphc::codec::{self, CodecOptions, Mode};
use sphc::synth::{self, GenSpec};
use sphc::transform;
use sphc::{EmbeddingMatrix, Error};

use crate::Failure;

type Shape = Option<(Option<usize>, usize)>;
type CmdResult = Result<String, Failure>;

fn with_path(e: Error, path: &Path) -> Failure {
    let mut f = Failure::from(e);
    f.message = format!("{}: {}", path.display(), f.message);
    f
}

fn read_file(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| with_path(e.into(), path))
}

fn read_matrix(path: &Path, shape: Shape) -> Result<(Vec<f32>, usize, usize), Failure> {
    synth::read_array(path, shape).map_err(|e| with_path(e, path))
}

fn mb_per_s(bytes: usize, elapsed: Duration) -> f64 {
    bytes as f64 / 1e6 / elapsed.as_secs_f64().max(1e-9)
}

pub fn compress(
    input: &Path,
    output: &Path,
    opts: &CodecOptions,
    shape: Shape,
    verify: bool,
    style: ReportStyle,
) -> CmdResult {
    let (data, n, d) = read_matrix(input, shape)?;
    let raw_bytes = data.len() * 4;
    let t0 = Instant::now();
    let bytes = codec::compress(&data, n, d, opts)?;
    let enc = t0.elapsed();
    fs::write(output, &bytes).map_err(|e| with_path(e.into(), output))?;

    let mut kv = KeyValues::new();
    kv.push("input", input.display().to_string())
        .push("output", output.display().to_string())
        .push("n", n)
        .push("d", d)
        .push("mode", opts.mode.name())
        .push("level", opts.level)
        .push("chunk_size", opts.chunk_size)
        .push("truncate_bits", opts.truncate_bits)
        .push("raw_bytes", raw_bytes)
        .push("compressed_bytes", bytes.len())
        .push("ratio", raw_bytes as f64 / bytes.len() as f64)
        .push("encode_seconds", enc.as_secs_f64())
        .push("encode_mb_per_s", mb_per_s(raw_bytes, enc));
    if verify {
        let t1 = Instant::now();
        let decoded = codec::decompress(&bytes, None)?;
        let dec = t1.elapsed();
        let original = EmbeddingMatrix::from_vec(n, d, data)?;
        let report = analysis::reconstruction_errors(&original, &decoded.into_matrix()?)?;
        kv.push("decode_seconds", dec.as_secs_f64())
            .push("decode_mb_per_s", mb_per_s(raw_bytes, dec))
            .push_report("", &report);
    }
    Ok(kv.render(style))
}

pub fn decompress(
    input: &Path,
    output: &Path,
    rows: Option<Range<usize>>,
    style: ReportStyle,
) -> CmdResult {
    let bytes = read_file(input)?;
    let t0 = Instant::now();
    let decoded = codec::decompress(&bytes, rows)?;
    let dec = t0.elapsed();
    synth::write_array(output, &decoded.data, decoded.n, decoded.d)?;

    let raw_bytes = decoded.data.len() * 4;
    let mut kv = KeyValues::new();
    kv.push("input", input.display().to_string())
        .push("output", output.display().to_string())
        .push("start_row", decoded.start_row)
        .push("n", decoded.n)
        .push("d", decoded.d)
        .push("compressed_bytes", bytes.len())
        .push("raw_bytes", raw_bytes)
        .push("norms_restored", decoded.norms.is_some())
        .push("decode_seconds", dec.as_secs_f64())
        .push("decode_mb_per_s", mb_per_s(raw_bytes, dec));
    Ok(kv.render(style))
}

pub fn analyze(input: &Path, shape: Shape, min_tail: usize, style: ReportStyle) -> CmdResult {
    let (data, n, d) = read_matrix(input, shape)?;
    let cartesian = analysis::entropy_report(&data)?;
    let (x, norms) = transform::check_norms(&data, n, d, transform::DEFAULT_NORM_TOLERANCE, true)?;
    if norms.violations > 0 {
        eprintln!(
            "warning: {} rows were not unit-norm (max deviation {:.3e}); analyzing normalized rows",
            norms.violations, norms.max_deviation
        );
    }
    let angles = transform::to_spherical(&x)?;
    let spherical = analysis::entropy_report(angles.as_slice())?;

    let mut kv = KeyValues::new();
    kv.push("n", n).push("d", d);
    kv.push_report("cartesian", &cartesian);
    kv.push_report("spherical", &spherical);
    kv.push(
        "total_bits_per_byte_reduction",
        cartesian.total_bits_per_byte - spherical.total_bits_per_byte,
    )
    .push(
        "exponent_entropy_reduction",
        cartesian.exponent_entropy_bits - spherical.exponent_entropy_bits,
    )
    .push("min_tail", min_tail);
    match analysis::concentration_fraction(&angles, min_tail) {
        Ok(f) => {
            kv.push("concentration_fraction", f);
        }
        Err(e @ Error::NoQualifyingColumns { .. }) => {
            eprintln!("warning: {e}");
            kv.push("concentration_fraction", Option::<f64>::None);
        }
        Err(e) => return Err(e.into()),
    }
    Ok(kv.render(style))
}

pub fn verify(
    original: &Path,
    candidate: &Path,
    shape: Shape,
    pairs: usize,
    seed: u64,
    style: ReportStyle,
) -> CmdResult {
    let (a, an, ad) = read_matrix(original, shape)?;
    let (b, bn, bd) = read_matrix(candidate, shape)?;
    if (an, ad) != (bn, bd) {
        return Err(Error::ShapeMismatch {
            left: (an, ad),
            right: (bn, bd),
        }
        .into());
    }
    let a = EmbeddingMatrix::from_vec(an, ad, a)?;
    let b = EmbeddingMatrix::from_vec(bn, bd, b)?;
    let report = analysis::reconstruction_errors(&a, &b)?;
    let cross = analysis::cross_pair_deviation(&a, &b, pairs, seed)?;
    let mut kv = KeyValues::new();
    kv.push("n", an).push("d", ad);
    kv.push_report("", &report);
    kv.push("cross_pair_max_err", cross)
        .push("cross_pairs", pairs);
    Ok(kv.render(style))
}

pub fn gen(spec: &GenSpec, output: &Path, style: ReportStyle) -> CmdResult {
    let x = spec.generate()?;
    synth::write_array(output, x.as_slice(), x.n(), x.d())?;
    let mut kv = KeyValues::new();
    kv.push("output", output.display().to_string());
    kv.push_report("", spec);
    kv.push("mean_pairwise_cosine", synth::mean_pairwise_cosine(&x));
    Ok(kv.render(style))
}

pub fn parse_levels(text: &str) -> Result<Vec<i32>, Failure> {
    let range = codec::level_range();
    let levels = text
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let l: i32 = s
                .parse()
                .map_err(|_| Failure::usage(format!("invalid level {s:?} in --levels")))?;
            if !range.contains(&l) {
                return Err(Failure::usage(format!(
                    "level {l} outside {}..={}",
                    range.start(),
                    range.end()
                )));
            }
            Ok(l)
        })
        .collect::<Result<Vec<_>, _>>()?;
    if levels.is_empty() {
        return Err(Failure::usage("--levels is empty"));
    }
    Ok(levels)
}

#[derive(Debug, Clone, Copy)]
struct BenchRow {
    level: i32,
    size_mb: f64,
    ratio: f64,
    enc_mb_s: f64,
    dec_mb_s: f64,
}

#[allow(clippy::too_many_arguments)]
pub fn bench(
    d: usize,
    size_mb: f64,
    levels: &[i32],
    mode: Mode,
    chunk_size: usize,
    repeats: usize,
    seed: u64,
    style: ReportStyle,
) -> CmdResult {
    if d < 2 || size_mb.is_nan() || size_mb <= 0.0 {
        return Err(Failure::usage("bench needs --d ≥ 2 and --size-mb > 0"));
    }
    let n = ((size_mb * 1e6 / (4.0 * d as f64)).round() as usize).max(1);
    let x = synth::gen_uniform(n, d, seed);
    let raw = 4 * n * d;

    let mut rows = Vec::with_capacity(levels.len());
    for &level in levels {
        let opts = CodecOptions {
            mode,
            level,
            chunk_size,
            ..CodecOptions::default()
        };
        let mut best_enc = Duration::MAX;
        let mut best_dec = Duration::MAX;
        let mut size = 0;
        for _ in 0..repeats {
            let t0 = Instant::now();
            let bytes = codec::compress_matrix(&x, &opts)?;
            best_enc = best_enc.min(t0.elapsed());
            let t1 = Instant::now();
            let out = codec::decompress(&bytes, None)?;
            best_dec = best_dec.min(t1.elapsed());
            debug_assert_eq!(out.n, n);
            size = bytes.len();
        }
        rows.push(BenchRow {
            level,
            size_mb: size as f64 / 1e6,
            ratio: raw as f64 / size as f64,
            enc_mb_s: mb_per_s(raw, best_enc),
            dec_mb_s: mb_per_s(raw, best_dec),
        });
    }

    let mut out = String::new();
    match style {
        ReportStyle::Lines => {
            out.push_str(&format!(
                "# mode={} d={d} n={n} raw_mb={:.2} chunk_size={chunk_size} threads={}\n",
                mode.name(),
                raw as f64 / 1e6,
                rayon::current_num_threads()
            ));
            out.push_str(&format!(
                "{:>5} {:>10} {:>7} {:>11} {:>11}\n",
                "level", "size_mb", "ratio", "enc_mb_s", "dec_mb_s"
            ));
            for r in &rows {
                out.push_str(&format!(
                    "{:>5} {:>10.2} {:>7.3} {:>11.1} {:>11.1}\n",
                    r.level, r.size_mb, r.ratio, r.enc_mb_s, r.dec_mb_s
                ));
            }
        }
        ReportStyle::Json => {
            for r in &rows {
                let mut kv = KeyValues::new();
                kv.push("mode", mode.name())
                    .push("d", d)
                    .push("n", n)
                    .push("level", r.level)
                    .push("size_mb", r.size_mb)
                    .push("ratio", r.ratio)
                    .push("enc_mb_s", r.enc_mb_s)
                    .push("dec_mb_s", r.dec_mb_s);
                out.push_str(&kv.render(ReportStyle::Json));
            }
        }
    }
    Ok(out)
}

pub fn similarity(
    input: &Path,
    row_a: usize,
    row_b: usize,
    check: bool,
    style: ReportStyle,
) -> CmdResult {
    let bytes = read_file(input)?;
    let a = codec::decompress_angles(&bytes, Some(row_a..row_a + 1))?;
    let b = codec::decompress_angles(&bytes, Some(row_b..row_b + 1))?;
    let sim = transform::angle_similarity(a.row(0), b.row(0))?;

    let mut kv = KeyValues::new();
    kv.push("row_a", row_a)
        .push("row_b", row_b)
        .push("similarity", sim);
    if check {
        let xa = codec::decompress(&bytes, Some(row_a..row_a + 1))?;
        let xb = codec::decompress(&bytes, Some(row_b..row_b + 1))?;
        let dot: f64 = xa
            .data
            .iter()
            .zip(&xb.data)
            .map(|(p, q)| *p as f64 * *q as f64)
            .sum();
        kv.push("cartesian_dot", dot)
            .push("delta", (sim - dot).abs());
    }
    Ok(kv.render(style))
}
