//! `.sphc` container layout.
//!
//! ```text
//! offset  size  field
//!  0       4    magic "SPHC"
//!  4       1    version (1)
//!  5       1    mode (0 spherical, 1 baseline)
//!  6       1    flags (bit0 norms present, bit1 truncation applied)
//!  7       1    truncate_bits
//!  8       8    n (u64)
//! 16       4    d (u32)
//! 20       4    chunk_size (u32, 0 = all rows in one chunk)
//! 24       4    num_chunks (u32)
//! 28    8*nc    compressed chunk lengths (u64 each)
//!   [if flags bit0: u64 norms length, then norms frame]
//!   chunk payloads, one Zstandard frame each
//! ```
//!
//! All integers are little-endian.

use std::ops::Range;

use crate::error::{Error, Result};

pub const MAGIC: [u8; 4] = *b"SPHC";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 28;

pub const FLAG_NORMS: u8 = 0b01;
pub const FLAG_TRUNCATED: u8 = 0b10;

/// Whether the stored values are spherical angles or raw coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    #[default]
    Spherical,
    #[serde(rename = "baseline")]
    BaselineCartesian,
}

impl Mode {
    pub fn to_byte(self) -> u8 {
        match self {
            Mode::Spherical => 0,
            Mode::BaselineCartesian => 1,
        }
    }

    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(Mode::Spherical),
            1 => Ok(Mode::BaselineCartesian),
            other => Err(Error::UnknownMode(other)),
        }
    }

    /// Stored values per row for a `d`-dimensional input.
    pub fn stored_width(self, d: usize) -> usize {
        match self {
            Mode::Spherical => d - 1,
            Mode::BaselineCartesian => d,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Mode::Spherical => "spherical",
            Mode::BaselineCartesian => "baseline",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "spherical" => Ok(Mode::Spherical),
            "baseline" | "cartesian" => Ok(Mode::BaselineCartesian),
            other => Err(format!(
                "unknown mode {other:?} (expected spherical or baseline)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ContainerHeader {
    pub magic: [u8; 4],
    pub version: u8,
    pub mode: Mode,
    pub flags: u8,
    pub truncate_bits: u8,
    pub n: u64,
    pub d: u32,
    pub chunk_size: u32,
    pub num_chunks: u32,
}

impl ContainerHeader {
    pub fn new(
        mode: Mode,
        n: usize,
        d: usize,
        chunk_size: usize,
        truncate_bits: u32,
        norms: bool,
    ) -> Self {
        let mut flags = 0;
        if norms {
            flags |= FLAG_NORMS;
        }
        if truncate_bits > 0 {
            flags |= FLAG_TRUNCATED;
        }
        let num_chunks = n.div_ceil(effective_chunk_rows(n, chunk_size));
        Self {
            magic: MAGIC,
            version: VERSION,
            mode,
            flags,
            truncate_bits: truncate_bits as u8,
            n: n as u64,
            d: d as u32,
            chunk_size: chunk_size as u32,
            num_chunks: num_chunks as u32,
        }
    }

    pub fn has_norms(&self) -> bool {
        self.flags & FLAG_NORMS != 0
    }

    pub fn rows_per_chunk(&self) -> usize {
        effective_chunk_rows(self.n as usize, self.chunk_size as usize)
    }

    /// Row range covered by chunk `i`.
    pub fn chunk_rows(&self, i: usize) -> Range<usize> {
        let per = self.rows_per_chunk();
        let start = i * per;
        start..(start + per).min(self.n as usize)
    }

    pub fn stored_width(&self) -> usize {
        self.mode.stored_width(self.d as usize)
    }

    pub fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.magic);
        out.push(self.version);
        out.push(self.mode.to_byte());
        out.push(self.flags);
        out.push(self.truncate_bits);
        out.extend_from_slice(&self.n.to_le_bytes());
        out.extend_from_slice(&self.d.to_le_bytes());
        out.extend_from_slice(&self.chunk_size.to_le_bytes());
        out.extend_from_slice(&self.num_chunks.to_le_bytes());
    }

    pub fn parse(bytes: &[u8]) -> Result<Self> {
        if bytes.len() >= 4 && bytes[..4] != MAGIC {
            return Err(Error::BadMagic(bytes[..4].try_into().unwrap()));
        }
        if bytes.len() < HEADER_LEN {
            return Err(Error::TruncatedHeader {
                needed: HEADER_LEN,
                available: bytes.len(),
            });
        }
        let version = bytes[4];
        if version != VERSION {
            return Err(Error::UnsupportedVersion(version));
        }
        let header = Self {
            magic: MAGIC,
            version,
            mode: Mode::from_byte(bytes[5])?,
            flags: bytes[6],
            truncate_bits: bytes[7],
            n: u64_at(bytes, 8),
            d: u32_at(bytes, 16),
            chunk_size: u32_at(bytes, 20),
            num_chunks: u32_at(bytes, 24),
        };
        if header.d < 2 {
            return Err(Error::CorruptFrame(format!(
                "header declares d = {}",
                header.d
            )));
        }
        if header.n == 0 {
            return Err(Error::CorruptFrame("header declares zero rows".into()));
        }
        let expected = (header.n as usize).div_ceil(header.rows_per_chunk());
        if header.num_chunks as usize != expected {
            return Err(Error::CorruptFrame(format!(
                "header declares {} chunks, layout implies {expected}",
                header.num_chunks
            )));
        }
        Ok(header)
    }
}

/// Rows per chunk after resolving `0` to "all rows".
pub fn effective_chunk_rows(n: usize, chunk_size: usize) -> usize {
    if chunk_size == 0 || chunk_size > n {
        n.max(1)
    } else {
        chunk_size
    }
}

fn u64_at(b: &[u8], at: usize) -> u64 {
    u64::from_le_bytes(b[at..at + 8].try_into().unwrap())
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes(b[at..at + 4].try_into().unwrap())
}

/// Parsed header plus absolute byte ranges of every stream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContainerLayout {
    pub header: ContainerHeader,
    pub chunk_lengths: Vec<u64>,
    pub norms: Option<Range<usize>>,
    /// Absolute offset of each chunk payload.
    pub chunk_offsets: Vec<usize>,
    /// One past the last payload byte.
    pub payload_end: usize,
}

impl ContainerLayout {
    pub fn chunk_range(&self, i: usize) -> Range<usize> {
        let start = self.chunk_offsets[i];
        start..start + self.chunk_lengths[i] as usize
    }

    /// Bytes occupied by the chunk payloads alone.
    pub fn payload_len(&self) -> usize {
        self.chunk_lengths.iter().map(|l| *l as usize).sum()
    }
}

/// Parses the header and chunk table without decoding any payload.
pub fn read_header(bytes: &[u8]) -> Result<ContainerLayout> {
    let header = ContainerHeader::parse(bytes)?;
    let nc = header.num_chunks as usize;
    let table_end = HEADER_LEN + 8 * nc;
    if bytes.len() < table_end {
        return Err(Error::TruncatedHeader {
            needed: table_end,
            available: bytes.len(),
        });
    }
    let chunk_lengths: Vec<u64> = (0..nc).map(|i| u64_at(bytes, HEADER_LEN + 8 * i)).collect();

    let mut cursor = table_end;
    let norms = if header.has_norms() {
        if bytes.len() < cursor + 8 {
            return Err(Error::TruncatedHeader {
                needed: cursor + 8,
                available: bytes.len(),
            });
        }
        let len = u64_at(bytes, cursor) as usize;
        cursor += 8;
        let range = cursor..cursor.checked_add(len).ok_or_else(overflow)?;
        cursor = range.end;
        Some(range)
    } else {
        None
    };

    let mut chunk_offsets = Vec::with_capacity(nc);
    for len in &chunk_lengths {
        chunk_offsets.push(cursor);
        cursor = cursor.checked_add(*len as usize).ok_or_else(overflow)?;
    }
    if cursor > bytes.len() {
        return Err(Error::CorruptFrame(format!(
            "container is {} bytes but its chunk table needs {cursor}",
            bytes.len()
        )));
    }
    Ok(ContainerLayout {
        header,
        chunk_lengths,
        norms,
        chunk_offsets,
        payload_end: cursor,
    })
}

fn overflow() -> Error {
    Error::CorruptFrame("chunk table offsets overflow".into())
}
