//! Chunked container codec.
//!
//! Spherical mode stores `d − 1` angles per row, baseline mode stores the raw
//! coordinates. Either way every chunk of rows is transposed, byte-shuffled
//! and entropy coded as its own Zstandard frame, so any row range can be
//! decoded without touching foreign chunks.

mod container;
mod shuffle;

use std::ops::Range;

use rayon::prelude::*;

pub use container::{
    effective_chunk_rows, read_header, ContainerHeader, ContainerLayout, Mode, FLAG_NORMS,
    FLAG_TRUNCATED, HEADER_LEN, MAGIC, VERSION,
};
pub use shuffle::{
    shuffle_filter, truncate_mantissa, truncate_mantissa_in_place, unshuffle_filter,
    unshuffle_rows, ELEMENT_BYTES, MAX_TRUNCATE_BITS, ROW_BLOCK,
};

use crate::error::{Error, Result};
use crate::matrix::{AngleMatrix, EmbeddingMatrix};
use crate::transform::{self, DEFAULT_NORM_TOLERANCE};

pub const DEFAULT_LEVEL: i32 = 3;
pub const DEFAULT_CHUNK_SIZE: usize = 1000;

/// Compression levels accepted by the entropy coder.
pub fn level_range() -> std::ops::RangeInclusive<i32> {
    zstd::compression_level_range()
}

#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CodecOptions {
    pub mode: Mode,
    /// Zstandard compression level.
    pub level: i32,
    /// Rows per chunk; 0 puts every row in one chunk.
    pub chunk_size: usize,
    /// Low mantissa bits zeroed before coding (0 keeps the path lossless).
    pub truncate_bits: u32,
    pub store_norms: bool,
    pub renormalize: bool,
    pub norm_tolerance: f64,
}

impl Default for CodecOptions {
    fn default() -> Self {
        Self {
            mode: Mode::Spherical,
            level: DEFAULT_LEVEL,
            chunk_size: DEFAULT_CHUNK_SIZE,
            truncate_bits: 0,
            store_norms: false,
            renormalize: false,
            norm_tolerance: DEFAULT_NORM_TOLERANCE,
        }
    }
}

impl CodecOptions {
    pub fn spherical() -> Self {
        Self::default()
    }

    pub fn baseline() -> Self {
        Self {
            mode: Mode::BaselineCartesian,
            ..Self::default()
        }
    }

    pub fn with_level(mut self, level: i32) -> Self {
        self.level = level;
        self
    }

    pub fn with_chunk_size(mut self, rows: usize) -> Self {
        self.chunk_size = rows;
        self
    }

    pub fn with_truncate_bits(mut self, k: u32) -> Self {
        self.truncate_bits = k;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.truncate_bits > MAX_TRUNCATE_BITS {
            return Err(Error::BitCountOutOfRange(self.truncate_bits));
        }
        if self.chunk_size > u32::MAX as usize {
            return Err(Error::InvalidParameter(format!(
                "chunk size {} does not fit the header",
                self.chunk_size
            )));
        }
        let levels = level_range();
        if !levels.contains(&self.level) {
            return Err(Error::InvalidParameter(format!(
                "level {} outside {}..={}",
                self.level,
                levels.start(),
                levels.end()
            )));
        }
        Ok(())
    }
}

/// Element type tag of a caller-supplied buffer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ElementType {
    F32Le,
    F32Be,
    F64,
    F16,
    BF16,
    I8,
    U8,
}

impl ElementType {
    pub fn size(self) -> usize {
        match self {
            ElementType::F32Le | ElementType::F32Be => 4,
            ElementType::F64 => 8,
            ElementType::F16 | ElementType::BF16 => 2,
            ElementType::I8 | ElementType::U8 => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ElementType::F32Le => "<f4",
            ElementType::F32Be => ">f4",
            ElementType::F64 => "f8",
            ElementType::F16 => "f2",
            ElementType::BF16 => "bf16",
            ElementType::I8 => "i1",
            ElementType::U8 => "u1",
        }
    }
}

/// Borrowed contiguous `n × d` buffer with an element type tag.
#[derive(Debug, Clone, Copy)]
pub struct BufferView<'a> {
    pub bytes: &'a [u8],
    pub n: usize,
    pub d: usize,
    pub dtype: ElementType,
}

impl<'a> BufferView<'a> {
    pub fn new(bytes: &'a [u8], n: usize, d: usize, dtype: ElementType) -> Self {
        Self { bytes, n, d, dtype }
    }

    /// Decodes the buffer as little-endian float32 after validating the tag
    /// and length.
    pub fn to_f32(&self) -> Result<Vec<f32>> {
        if self.dtype != ElementType::F32Le {
            return Err(Error::UnsupportedDtype(self.dtype.name().to_string()));
        }
        let expected = 4 * self.n * self.d;
        if self.bytes.len() != expected {
            return Err(Error::LengthMismatch {
                expected,
                actual: self.bytes.len(),
            });
        }
        Ok(self
            .bytes
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect())
    }
}

/// Compresses a tagged buffer; anything other than little-endian float32 is
/// rejected with [`Error::UnsupportedDtype`].
pub fn compress_view(view: BufferView<'_>, opts: &CodecOptions) -> Result<Vec<u8>> {
    let values = view.to_f32()?;
    compress(&values, view.n, view.d, opts)
}

pub fn compress_matrix(x: &EmbeddingMatrix<f32>, opts: &CodecOptions) -> Result<Vec<u8>> {
    compress(x.as_slice(), x.n(), x.d(), opts)
}

/// Stored per-row values before chunking: angles or coordinates.
struct Prepared {
    width: usize,
    values: Vec<f32>,
    norms: Option<Vec<f32>>,
}

fn prepare(data: &[f32], n: usize, d: usize, opts: &CodecOptions) -> Result<Prepared> {
    if d < 2 {
        return Err(Error::DimensionTooSmall { d });
    }
    if n == 0 {
        return Err(Error::EmptyInput);
    }
    if data.len() != n * d {
        return Err(Error::LengthMismatch {
            expected: n * d,
            actual: data.len(),
        });
    }
    if let Some(index) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFiniteInput { index });
    }

    let enforce_norms = opts.mode == Mode::Spherical || opts.renormalize;
    let report = if enforce_norms || opts.store_norms {
        Some(transform::norm_report(data, n, d, opts.norm_tolerance)?)
    } else {
        None
    };
    let renormalized = match &report {
        Some(r) if enforce_norms && r.violations > 0 && !opts.renormalize => {
            return Err(Error::NormViolation {
                count: r.violations,
                max_deviation: r.max_deviation,
            });
        }
        // Stored norms rescale decoded rows, so the payload must hold unit
        // directions. Angles are scale-free; Cartesian values are not.
        Some(_)
            if opts.renormalize || (opts.store_norms && opts.mode == Mode::BaselineCartesian) =>
        {
            Some(
                transform::check_norms(data, n, d, opts.norm_tolerance, true)?
                    .0
                    .into_vec(),
            )
        }
        _ => None,
    };
    let unit = renormalized.as_deref().unwrap_or(data);

    let norms = opts
        .store_norms
        .then(|| {
            report
                .as_ref()
                .map(|r| r.norms.iter().map(|v| *v as f32).collect())
        })
        .flatten();

    let (width, values) = match opts.mode {
        Mode::Spherical => (d - 1, transform::rows_to_spherical(unit, d)),
        Mode::BaselineCartesian => (d, renormalized.unwrap_or_else(|| data.to_vec())),
    };
    Ok(Prepared {
        width,
        values,
        norms,
    })
}

fn encode_frame(raw: &[u8], level: i32) -> Result<Vec<u8>> {
    zstd::bulk::compress(raw, level).map_err(Error::Io)
}

fn decode_frame(frame: &[u8], expected: usize) -> Result<Vec<u8>> {
    let out =
        zstd::bulk::decompress(frame, expected).map_err(|e| Error::CorruptFrame(e.to_string()))?;
    if out.len() != expected {
        return Err(Error::CorruptFrame(format!(
            "frame decoded to {} bytes, expected {expected}",
            out.len()
        )));
    }
    Ok(out)
}

fn encode_chunk(values: &[f32], rows: usize, width: usize, opts: &CodecOptions) -> Result<Vec<u8>> {
    let shuffled = if opts.truncate_bits > 0 {
        let truncated = truncate_mantissa(values, opts.truncate_bits)?;
        shuffle_filter(&truncated, rows, width)
    } else {
        shuffle_filter(values, rows, width)
    };
    encode_frame(&shuffled, opts.level)
}

/// Compresses a row-major `n × d` float32 matrix into container bytes.
pub fn compress(data: &[f32], n: usize, d: usize, opts: &CodecOptions) -> Result<Vec<u8>> {
    opts.validate()?;
    let prepared = prepare(data, n, d, opts)?;
    let header = ContainerHeader::new(
        opts.mode,
        n,
        d,
        opts.chunk_size,
        opts.truncate_bits,
        prepared.norms.is_some(),
    );
    let per = header.rows_per_chunk();
    let w = prepared.width;

    let frames: Vec<Vec<u8>> = prepared
        .values
        .par_chunks(per * w)
        .map(|chunk| encode_chunk(chunk, chunk.len() / w, w, opts))
        .collect::<Result<_>>()?;

    let norms_frame = match &prepared.norms {
        Some(norms) => Some(encode_frame(
            &shuffle_filter(norms, norms.len(), 1),
            opts.level,
        )?),
        None => None,
    };

    let payload: usize = frames.iter().map(Vec::len).sum();
    let mut out = Vec::with_capacity(
        HEADER_LEN + 8 * frames.len() + norms_frame.as_ref().map_or(0, |f| f.len() + 8) + payload,
    );
    header.write_to(&mut out);
    for f in &frames {
        out.extend_from_slice(&(f.len() as u64).to_le_bytes());
    }
    if let Some(f) = &norms_frame {
        out.extend_from_slice(&(f.len() as u64).to_le_bytes());
        out.extend_from_slice(f);
    }
    for f in &frames {
        out.extend_from_slice(f);
    }
    Ok(out)
}

/// Rows decoded from a container.
#[derive(Debug, Clone, PartialEq)]
pub struct Decoded {
    /// First decoded row in container coordinates.
    pub start_row: usize,
    pub n: usize,
    pub d: usize,
    pub data: Vec<f32>,
    /// Original row norms, when the container stores them.
    pub norms: Option<Vec<f32>>,
}

impl Decoded {
    pub fn into_matrix(self) -> Result<EmbeddingMatrix<f32>> {
        EmbeddingMatrix::from_vec(self.n, self.d, self.data)
    }
}

fn resolve_range(n: usize, range: Option<Range<usize>>) -> Result<Range<usize>> {
    match range {
        None => Ok(0..n),
        Some(r) if r.start < r.end && r.end <= n => Ok(r),
        Some(r) => Err(Error::RangeOutOfBounds {
            start: r.start,
            end: r.end,
            n,
        }),
    }
}

/// Decodes the stored float32 values (angles or coordinates) for `range`,
/// exactly as they entered the shuffle filter.
fn decode_stored(bytes: &[u8], layout: &ContainerLayout, range: &Range<usize>) -> Result<Vec<f32>> {
    let header = &layout.header;
    let w = header.stored_width();
    let per = header.rows_per_chunk();
    let first = range.start / per;
    let last = (range.end - 1) / per;

    let parts: Vec<Vec<f32>> = (first..=last)
        .into_par_iter()
        .map(|i| {
            let rows = header.chunk_rows(i);
            let m = rows.len();
            let raw = decode_frame(&bytes[layout.chunk_range(i)], m * w * ELEMENT_BYTES)?;
            let mut values = unshuffle_filter(&raw, m, w)?;
            let lo = range.start.max(rows.start) - rows.start;
            let hi = range.end.min(rows.end) - rows.start;
            values.truncate(hi * w);
            values.drain(..lo * w);
            Ok(values)
        })
        .collect::<Result<_>>()?;
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().unwrap_or_default());
    }
    Ok(parts.concat())
}

/// Decodes rows `range` of a spherical container straight to Cartesian
/// coordinates, one block of rows at a time, without materializing the
/// full angle matrix.
fn decode_spherical(
    bytes: &[u8],
    layout: &ContainerLayout,
    range: &Range<usize>,
) -> Result<Vec<f32>> {
    let header = &layout.header;
    let w = header.stored_width();
    let d = w + 1;
    let per = header.rows_per_chunk();
    let first = range.start / per;
    let last = (range.end - 1) / per;

    let parts: Vec<Vec<f32>> = (first..=last)
        .into_par_iter()
        .map(|i| {
            let rows = header.chunk_rows(i);
            let m = rows.len();
            let raw = decode_frame(&bytes[layout.chunk_range(i)], m * w * ELEMENT_BYTES)?;
            let lo = range.start.max(rows.start) - rows.start;
            let hi = range.end.min(rows.end) - rows.start;
            let mut out = vec![0f32; (hi - lo) * d];
            out.par_chunks_mut(ROW_BLOCK * d)
                .enumerate()
                .try_for_each_init(
                    || vec![0f32; ROW_BLOCK * w],
                    |angles, (b, block)| {
                        let start = lo + b * ROW_BLOCK;
                        let count = block.len() / d;
                        let angles = &mut angles[..count * w];
                        unshuffle_rows(&raw, m, w, start..start + count, angles);
                        if let Some(k) = angles.iter().position(|v| !v.is_finite()) {
                            return Err(Error::NonFiniteInput {
                                index: (rows.start + start) * w + k,
                            });
                        }
                        for (theta, x) in angles.chunks_exact(w).zip(block.chunks_exact_mut(d)) {
                            transform::row_from_spherical(theta, x);
                        }
                        Ok(())
                    },
                )?;
            Ok(out)
        })
        .collect::<Result<_>>()?;
    if parts.len() == 1 {
        return Ok(parts.into_iter().next().unwrap_or_default());
    }
    Ok(parts.concat())
}

fn decode_norms(
    bytes: &[u8],
    layout: &ContainerLayout,
    range: &Range<usize>,
) -> Result<Option<Vec<f32>>> {
    let Some(norms_range) = layout.norms.clone() else {
        return Ok(None);
    };
    let n = layout.header.n as usize;
    let raw = decode_frame(&bytes[norms_range], n * ELEMENT_BYTES)?;
    let norms = unshuffle_filter(&raw, n, 1)?;
    Ok(Some(norms[range.clone()].to_vec()))
}

/// Decodes rows `range` (all rows when `None`). Only chunks that intersect
/// the range are decoded; stored norms, when present, rescale the rows.
pub fn decompress(bytes: &[u8], range: Option<Range<usize>>) -> Result<Decoded> {
    let layout = read_header(bytes)?;
    let header = layout.header;
    let d = header.d as usize;
    let range = resolve_range(header.n as usize, range)?;
    let norms = decode_norms(bytes, &layout, &range)?;
    let mut data = match header.mode {
        Mode::BaselineCartesian => decode_stored(bytes, &layout, &range)?,
        Mode::Spherical => decode_spherical(bytes, &layout, &range)?,
    };
    if let Some(norms) = &norms {
        data.par_chunks_exact_mut(d)
            .zip(norms.par_iter())
            .for_each(|(row, r)| {
                for v in row {
                    *v = (*v as f64 * *r as f64) as f32;
                }
            });
    }
    Ok(Decoded {
        start_row: range.start,
        n: range.len(),
        d,
        data,
        norms,
    })
}

/// Decodes the stored angles of a spherical container without reconstructing
/// Cartesian rows.
pub fn decompress_angles(bytes: &[u8], range: Option<Range<usize>>) -> Result<AngleMatrix<f32>> {
    let layout = read_header(bytes)?;
    if layout.header.mode != Mode::Spherical {
        return Err(Error::NotSpherical);
    }
    let range = resolve_range(layout.header.n as usize, range)?;
    let stored = decode_stored(bytes, &layout, &range)?;
    AngleMatrix::from_vec(range.len(), layout.header.stored_width(), stored)
}

/// Decodes the values exactly as they entered the shuffle filter, for either
/// mode. Returns the stored row width alongside the values.
pub fn decompress_stored(bytes: &[u8], range: Option<Range<usize>>) -> Result<(usize, Vec<f32>)> {
    let layout = read_header(bytes)?;
    let range = resolve_range(layout.header.n as usize, range)?;
    Ok((
        layout.header.stored_width(),
        decode_stored(bytes, &layout, &range)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> Vec<f32> {
        // three unit rows in d = 4
        vec![
            0.5, 0.5, 0.5, 0.5, //
            1.0, 0.0, 0.0, 0.0, //
            0.0, 0.6, 0.0, -0.8,
        ]
    }

    #[test]
    fn spherical_roundtrip_small() {
        let x = tiny();
        for chunk in [0, 1, 2, 5] {
            let bytes =
                compress(&x, 3, 4, &CodecOptions::spherical().with_chunk_size(chunk)).unwrap();
            let out = decompress(&bytes, None).unwrap();
            assert_eq!(out.n, 3);
            for (a, b) in x.iter().zip(&out.data) {
                assert!((a - b).abs() < 1.2e-7, "{a} vs {b}");
            }
        }
    }

    #[test]
    fn baseline_is_lossless() {
        let x = tiny();
        let bytes = compress(&x, 3, 4, &CodecOptions::baseline().with_chunk_size(2)).unwrap();
        assert_eq!(decompress(&bytes, None).unwrap().data, x);
        assert_eq!(decompress(&bytes, Some(1..3)).unwrap().data, &x[4..]);
    }

    #[test]
    fn baseline_accepts_non_unit_rows() {
        let x = vec![3.0f32, 4.0, -1.0, 0.25];
        let bytes = compress(&x, 2, 2, &CodecOptions::baseline()).unwrap();
        assert_eq!(decompress(&bytes, None).unwrap().data, x);
        assert!(matches!(
            compress(&x, 2, 2, &CodecOptions::spherical()),
            Err(Error::NormViolation { count: 2, .. })
        ));
    }

    #[test]
    fn stored_norms_rescale_rows() {
        let x = vec![3.0f32, 4.0, 0.0, -2.0];
        let opts = CodecOptions {
            store_norms: true,
            renormalize: true,
            ..CodecOptions::spherical()
        };
        let bytes = compress(&x, 2, 2, &opts).unwrap();
        assert_ne!(read_header(&bytes).unwrap().header.flags & FLAG_NORMS, 0);
        let out = decompress(&bytes, None).unwrap();
        assert_eq!(out.norms.as_deref(), Some(&[5.0f32, 2.0][..]));
        for (a, b) in x.iter().zip(&out.data) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
        let tail = decompress(&bytes, Some(1..2)).unwrap();
        assert_eq!(tail.norms.as_deref(), Some(&[2.0f32][..]));
    }

    #[test]
    fn baseline_stored_norms_roundtrip_raw_rows() {
        let x = vec![3.0f32, 4.0, 0.0, -2.0];
        let opts = CodecOptions {
            store_norms: true,
            ..CodecOptions::baseline()
        };
        let out = decompress(&compress(&x, 2, 2, &opts).unwrap(), None).unwrap();
        for (a, b) in x.iter().zip(&out.data) {
            assert!((a - b).abs() < 1e-6, "{a} vs {b}");
        }
    }

    #[test]
    fn option_and_input_errors() {
        let x = tiny();
        assert!(matches!(
            compress(&x, 3, 4, &CodecOptions::spherical().with_truncate_bits(23)),
            Err(Error::BitCountOutOfRange(23))
        ));
        assert!(compress(&x, 3, 4, &CodecOptions::spherical().with_level(99)).is_err());
        let mut bad = x.clone();
        bad[5] = f32::INFINITY;
        assert!(matches!(
            compress(&bad, 3, 4, &CodecOptions::baseline()),
            Err(Error::NonFiniteInput { index: 5 })
        ));
        assert!(matches!(
            compress(&[1.0], 1, 1, &CodecOptions::spherical()),
            Err(Error::DimensionTooSmall { d: 1 })
        ));
        let raw = [0u8; 16];
        let view = BufferView::new(&raw, 1, 2, ElementType::F64);
        assert!(matches!(
            compress_view(view, &CodecOptions::spherical()),
            Err(Error::UnsupportedDtype(_))
        ));
    }

    #[test]
    fn range_errors_and_corruption() {
        let x = tiny();
        let bytes = compress(&x, 3, 4, &CodecOptions::spherical().with_chunk_size(1)).unwrap();
        assert!(matches!(
            decompress(&bytes, Some(2..4)),
            Err(Error::RangeOutOfBounds {
                start: 2,
                end: 4,
                n: 3
            })
        ));
        assert!(matches!(
            decompress(&bytes, Some(1..1)),
            Err(Error::RangeOutOfBounds { .. })
        ));

        let layout = read_header(&bytes).unwrap();
        let mut corrupt = bytes.clone();
        let mid = layout.chunk_range(1);
        for b in &mut corrupt[mid] {
            *b ^= 0x5a;
        }
        assert!(matches!(
            decompress(&corrupt, None),
            Err(Error::CorruptFrame(_))
        ));
        // chunk 0 is untouched, so a range inside it still decodes
        assert!(decompress(&corrupt, Some(0..1)).is_ok());
        assert!(matches!(
            decompress(&bytes[..bytes.len() - 1], None),
            Err(Error::CorruptFrame(_))
        ));
    }

    #[test]
    fn angles_only_for_spherical() {
        let x = tiny();
        let b = compress(&x, 3, 4, &CodecOptions::baseline()).unwrap();
        assert!(matches!(
            decompress_angles(&b, None),
            Err(Error::NotSpherical)
        ));
        let s = compress(&x, 3, 4, &CodecOptions::spherical()).unwrap();
        let a = decompress_angles(&s, Some(1..2)).unwrap();
        assert_eq!(a.as_slice(), &[0.0, std::f32::consts::FRAC_PI_2, 0.0]);
    }
}
