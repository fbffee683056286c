//! Entropy, exponent concentration, reconstruction error, and size
//! comparison measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::codec::{self, CodecOptions, Mode};
use crate::error::{Error, Result};
use crate::matrix::{AngleMatrix, EmbeddingMatrix};
use crate::scalar::Scalar;

/// Binary32 exponent field of `π/2` and everything else in `[1, 2)`.
pub const UNIT_EXPONENT: u8 = 127;

fn histogram_entropy(hist: &[u64], total: u64) -> f64 {
    let total = total as f64;
    let h: f64 = hist
        .iter()
        .filter(|c| **c > 0)
        .map(|c| {
            let p = *c as f64 / total;
            -p * p.log2()
        })
        .sum();
    // -0.0 for a single-symbol histogram
    h.max(0.0)
}

fn byte_histogram(buf: &[u8]) -> [u64; 256] {
    let mut hist = [0u64; 256];
    for b in buf {
        hist[*b as usize] += 1;
    }
    hist
}

/// Shannon entropy of the byte histogram, in bits per byte.
pub fn byte_entropy(buf: &[u8]) -> Result<f64> {
    if buf.is_empty() {
        return Err(Error::EmptyInput);
    }
    Ok(histogram_entropy(&byte_histogram(buf), buf.len() as u64))
}

/// Bits 30..23 of a binary32 value.
#[inline]
pub fn exponent_field(v: f32) -> u8 {
    ((v.to_bits() >> 23) & 0xff) as u8
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentStats {
    pub histogram: Vec<u64>,
    pub entropy_bits: f64,
    pub unique: usize,
}

pub fn exponent_stats(values: &[f32]) -> Result<ExponentStats> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut hist = vec![0u64; 256];
    for v in values {
        hist[exponent_field(*v) as usize] += 1;
    }
    Ok(ExponentStats {
        entropy_bits: histogram_entropy(&hist, values.len() as u64),
        unique: hist.iter().filter(|c| **c > 0).count(),
        histogram: hist,
    })
}

/// Byte-level entropy profile of a float32 buffer.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EntropyReport {
    pub total_bits_per_byte: f64,
    /// Plane 0 is the least significant byte, plane 3 holds sign and high
    /// exponent bits.
    pub plane_bits_per_byte: [f64; 4],
    pub exponent_entropy_bits: f64,
    pub exponent_unique: usize,
    pub exponent_histogram: Vec<u64>,
}

pub fn entropy_report(values: &[f32]) -> Result<EntropyReport> {
    if values.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut planes = [[0u64; 256]; 4];
    for v in values {
        for (p, b) in v.to_le_bytes().iter().enumerate() {
            planes[p][*b as usize] += 1;
        }
    }
    let count = values.len() as u64;
    let mut total = [0u64; 256];
    let mut plane_bits = [0.0; 4];
    for (p, hist) in planes.iter().enumerate() {
        plane_bits[p] = histogram_entropy(hist, count);
        for (t, c) in total.iter_mut().zip(hist) {
            *t += c;
        }
    }
    let exp = exponent_stats(values)?;
    Ok(EntropyReport {
        total_bits_per_byte: histogram_entropy(&total, 4 * count),
        plane_bits_per_byte: plane_bits,
        exponent_entropy_bits: exp.entropy_bits,
        exponent_unique: exp.unique,
        exponent_histogram: exp.histogram,
    })
}

/// Fraction of angles whose exponent field is 127, over the columns `k`
/// (1-based) with `d − k ≥ min_tail`.
pub fn concentration_fraction(theta: &AngleMatrix<f32>, min_tail: usize) -> Result<f64> {
    let d = theta.d();
    // column index c is angle k = c + 1
    let cols = (0..theta.width())
        .filter(|c| d - (c + 1) >= min_tail)
        .count();
    if cols == 0 {
        return Err(Error::NoQualifyingColumns { d, min_tail });
    }
    // qualifying columns form a prefix, since d − k decreases with k
    let hits: usize = theta
        .rows()
        .map(|row| {
            row[..cols]
                .iter()
                .filter(|v| exponent_field(**v) == UNIT_EXPONENT)
                .count()
        })
        .sum();
    Ok(hits as f64 / (cols * theta.n()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ErrorReport {
    pub max_abs: f64,
    pub mean_abs: f64,
    /// `max_i |⟨x_i, x'_i⟩ − 1|`
    pub cos_max_err: f64,
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x.widen() * y.widen()).sum()
}

fn check_same_shape<T: Scalar>(x: &EmbeddingMatrix<T>, y: &EmbeddingMatrix<T>) -> Result<()> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch {
            left: x.shape(),
            right: y.shape(),
        });
    }
    Ok(())
}

pub fn reconstruction_errors<T: Scalar>(
    x: &EmbeddingMatrix<T>,
    x_prime: &EmbeddingMatrix<T>,
) -> Result<ErrorReport> {
    check_same_shape(x, x_prime)?;
    let mut max_abs = 0.0f64;
    let mut sum = 0.0f64;
    for (a, b) in x.as_slice().iter().zip(x_prime.as_slice()) {
        let e = (a.widen() - b.widen()).abs();
        max_abs = max_abs.max(e);
        sum += e;
    }
    let cos_max_err = x
        .rows()
        .zip(x_prime.rows())
        .map(|(a, b)| (dot(a, b) - 1.0).abs())
        .fold(0.0, f64::max);
    Ok(ErrorReport {
        max_abs,
        mean_abs: sum / x.as_slice().len() as f64,
        cos_max_err,
    })
}

/// Largest change of a pairwise dot product, `|x_i·x_j − x'_i·x'_j|`, over
/// `pairs` random row pairs drawn deterministically from `seed`.
pub fn cross_pair_deviation<T: Scalar>(
    x: &EmbeddingMatrix<T>,
    x_prime: &EmbeddingMatrix<T>,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    check_same_shape(x, x_prime)?;
    let n = x.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = 0.0f64;
    for _ in 0..pairs {
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        let delta = (dot(x.row(i), x.row(j)) - dot(x_prime.row(i), x_prime.row(j))).abs();
        worst = worst.max(delta);
    }
    Ok(worst)
}

/// Sizes of one matrix under both modes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub raw_bytes: usize,
    pub baseline_bytes: usize,
    pub spherical_bytes: usize,
    pub ratio_baseline: f64,
    pub ratio_spherical: f64,
    /// `1 − spherical / baseline`
    pub size_reduction_vs_baseline: f64,
    /// `baseline / spherical − 1`
    pub ratio_gain_vs_baseline: f64,
}

impl ComparisonReport {
    pub fn from_sizes(raw_bytes: usize, baseline_bytes: usize, spherical_bytes: usize) -> Self {
        let ratio = |c: usize| {
            if c == 0 {
                0.0
            } else {
                raw_bytes as f64 / c as f64
            }
        };
        let (b, s) = (baseline_bytes as f64, spherical_bytes as f64);
        Self {
            raw_bytes,
            baseline_bytes,
            spherical_bytes,
            ratio_baseline: ratio(baseline_bytes),
            ratio_spherical: ratio(spherical_bytes),
            size_reduction_vs_baseline: if b > 0.0 { 1.0 - s / b } else { 0.0 },
            ratio_gain_vs_baseline: if s > 0.0 { b / s - 1.0 } else { 0.0 },
        }
    }
}

/// Compresses `x` in both modes with the same level and chunking.
pub fn compare_methods(x: &EmbeddingMatrix<f32>, opts: &CodecOptions) -> Result<ComparisonReport> {
    let spherical = codec::compress_matrix(
        x,
        &CodecOptions {
            mode: Mode::Spherical,
            ..opts.clone()
        },
    )?;
    let baseline = codec::compress_matrix(
        x,
        &CodecOptions {
            mode: Mode::BaselineCartesian,
            ..opts.clone()
        },
    )?;
    Ok(ComparisonReport::from_sizes(
        4 * x.as_slice().len(),
        baseline.len(),
        spherical.len(),
    ))
}

/// Output flavour for [`KeyValues::render`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReportStyle {
    /// `key=value` per line; arrays as JSON arrays.
    #[default]
    Lines,
    /// A single flat JSON object.
    Json,
}

/// Ordered flat key-value document assembled from one or more reports.
#[derive(Debug, Clone, Default)]
pub struct KeyValues {
    entries: Vec<(String, serde_json::Value)>,
}

impl KeyValues {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, key: impl Into<String>, value: impl Serialize) -> &mut Self {
        let value = serde_json::to_value(value).unwrap_or(serde_json::Value::Null);
        self.entries.push((key.into(), value));
        self
    }

    /// Appends every top-level field of `report`, prefixed by `prefix.`
    /// when `prefix` is non-empty.
    pub fn push_report(&mut self, prefix: &str, report: &impl Serialize) -> &mut Self {
        if let Ok(serde_json::Value::Object(map)) = serde_json::to_value(report) {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k
                } else {
                    format!("{prefix}.{k}")
                };
                self.entries.push((key, v));
            }
        }
        self
    }

    pub fn get(&self, key: &str) -> Option<&serde_json::Value> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v)
    }

    pub fn render(&self, style: ReportStyle) -> String {
        match style {
            ReportStyle::Lines => {
                let mut out = String::new();
                for (k, v) in &self.entries {
                    let text = match v {
                        serde_json::Value::String(s) => s.clone(),
                        other => other.to_string(),
                    };
                    out.push_str(k);
                    out.push('=');
                    out.push_str(&text);
                    out.push('\n');
                }
                out
            }
            ReportStyle::Json => {
                let map: serde_json::Map<String, serde_json::Value> =
                    self.entries.iter().cloned().collect();
                let mut s = serde_json::Value::Object(map).to_string();
                s.push('\n');
                s
            }
        }
    }
}

/// Parses `key=value` lines back into pairs (values left as text).
pub fn parse_lines(text: &str) -> Vec<(String, String)> {
    text.lines()
        .filter_map(|l| l.split_once('='))
        .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn entropy_examples() {
        assert_eq!(byte_entropy(&[7u8; 100]).unwrap(), 0.0);
        let all: Vec<u8> = (0..=255).collect();
        assert!((byte_entropy(&all).unwrap() - 8.0).abs() < 1e-12);
        assert!(matches!(byte_entropy(&[]), Err(Error::EmptyInput)));
        // two equiprobable symbols
        assert!((byte_entropy(&[0, 1, 0, 1]).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn exponent_examples() {
        let vals = [1.0f32, 1.5, 1.999, 1.25];
        let s = exponent_stats(&vals).unwrap();
        assert_eq!(s.unique, 1);
        assert_eq!(s.entropy_bits, 0.0);
        assert_eq!(s.histogram[127], 4);
        assert_eq!(exponent_field(1.25), 127);
        assert_eq!(exponent_field(0.5), 126);
        assert_eq!(exponent_field(-2.0), 128);
        assert!(matches!(exponent_stats(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn entropy_report_planes() {
        let vals = vec![1.5f32; 64];
        let r = entropy_report(&vals).unwrap();
        assert_eq!(r.plane_bits_per_byte, [0.0; 4]);
        // bytes of 1.5f32 are 00 00 c0 3f: three distinct symbols, p = 1/2, 1/4, 1/4
        assert!((r.total_bits_per_byte - 1.5).abs() < 1e-12);
        assert_eq!(r.exponent_unique, 1);
    }

    #[test]
    fn concentration_constant_matrix() {
        let a = AngleMatrix::from_vec(4, 9, vec![std::f32::consts::FRAC_PI_2; 36]).unwrap();
        assert_eq!(concentration_fraction(&a, 1).unwrap(), 1.0);
        assert_eq!(concentration_fraction(&a, 9).unwrap(), 1.0);
        assert!(matches!(
            concentration_fraction(&a, 10),
            Err(Error::NoQualifyingColumns {
                d: 10,
                min_tail: 10
            })
        ));
    }

    #[test]
    fn concentration_counts_prefix_columns() {
        // d = 4: columns k = 1, 2, 3 have tails 3, 2, 1
        let row = [1.5f32, 0.5, 0.5];
        let a = AngleMatrix::from_vec(1, 3, row.to_vec()).unwrap();
        assert_eq!(concentration_fraction(&a, 3).unwrap(), 1.0);
        assert!((concentration_fraction(&a, 1).unwrap() - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn identical_matrices_have_zero_error() {
        let x = EmbeddingMatrix::from_vec(2, 2, vec![0.6f32, 0.8, 1.0, 0.0]).unwrap();
        let r = reconstruction_errors(&x, &x).unwrap();
        assert_eq!(r.max_abs, 0.0);
        assert_eq!(r.mean_abs, 0.0);
        assert!(r.cos_max_err < 1e-7);
        assert_eq!(cross_pair_deviation(&x, &x, 100, 1).unwrap(), 0.0);
        let y = EmbeddingMatrix::from_vec(1, 2, vec![1.0f32, 0.0]).unwrap();
        assert!(matches!(
            reconstruction_errors(&x, &y),
            Err(Error::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn comparison_arithmetic() {
        // whole-matrix sizes from a 7600 × 2048 float32 run: 59.38 MB raw, 37.59 MB spherical
        let r = ComparisonReport::from_sizes(5938, 4957, 3759);
        assert!((r.ratio_spherical - 1.58).abs() < 0.005);
        // 9.37 MB baseline vs 7.43 MB spherical
        let r = ComparisonReport::from_sizes(1000, 937, 743);
        assert!((r.ratio_gain_vs_baseline - 0.261).abs() < 0.0005);
        assert!((r.size_reduction_vs_baseline - (1.0 - 743.0 / 937.0)).abs() < 1e-12);
        // the two improvement figures are tied by g = s / (1 − s)
        let s = r.size_reduction_vs_baseline;
        assert!((r.ratio_gain_vs_baseline - s / (1.0 - s)).abs() < 1e-12);
    }

    #[test]
    fn key_value_rendering() {
        let mut kv = KeyValues::new();
        kv.push("mode", "spherical");
        kv.push_report(
            "err",
            &ErrorReport {
                max_abs: 0.5,
                mean_abs: 0.25,
                cos_max_err: 0.0,
            },
        );
        let lines = kv.render(ReportStyle::Lines);
        assert_eq!(
            lines,
            "mode=spherical\nerr.max_abs=0.5\nerr.mean_abs=0.25\nerr.cos_max_err=0.0\n"
        );
        let parsed = parse_lines(&lines);
        assert_eq!(parsed[1], ("err.max_abs".to_string(), "0.5".to_string()));
        let json: serde_json::Value = serde_json::from_str(&kv.render(ReportStyle::Json)).unwrap();
        assert_eq!(json["err.mean_abs"], 0.25);
    }

    proptest! {
        #[test]
        fn entropy_is_bounded(buf in prop::collection::vec(any::<u8>(), 1..2000)) {
            let h = byte_entropy(&buf).unwrap();
            prop_assert!((0.0..=8.0 + 1e-12).contains(&h));
        }

        #[test]
        fn exponent_matches_shift_mask(bits in any::<u32>()) {
            let v = f32::from_bits(bits);
            prop_assert_eq!(exponent_field(v) as u32, (bits << 1) >> 24);
        }
    }
}
