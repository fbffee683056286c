//! Minimal NPY (v1.0 write, v1/v2/v3 read) and raw float32 array files.
//!
//! Only 2-D, C-order, little-endian float32 arrays are supported.

use std::fs;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

const NPY_MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

/// Parsed NPY header dictionary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NpyHeader {
    pub descr: String,
    pub fortran_order: bool,
    pub shape: Vec<usize>,
}

/// Header bytes (magic through trailing newline) for a `(n, d)` `<f4` array.
pub fn npy_header_bytes(n: usize, d: usize) -> Vec<u8> {
    let dict = format!("{{'descr': '<f4', 'fortran_order': False, 'shape': ({n}, {d}), }}");
    // magic(6) + version(2) + len(2) + dict + padding + '\n' is a multiple of 64
    let unpadded = 10 + dict.len() + 1;
    let pad = (ALIGN - unpadded % ALIGN) % ALIGN;
    let header_len = dict.len() + pad + 1;
    let mut out = Vec::with_capacity(10 + header_len);
    out.extend_from_slice(NPY_MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(header_len as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out.extend(std::iter::repeat_n(b' ', pad));
    out.push(b'\n');
    out
}

fn f32s_to_le(data: &[f32]) -> Vec<u8> {
    data.iter().flat_map(|v| v.to_le_bytes()).collect()
}

fn le_to_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect()
}

pub fn write_npy(path: impl AsRef<Path>, data: &[f32], n: usize, d: usize) -> Result<()> {
    if data.len() != n * d {
        return Err(Error::LengthMismatch {
            expected: n * d,
            actual: data.len(),
        });
    }
    let mut file = std::io::BufWriter::new(fs::File::create(path)?);
    file.write_all(&npy_header_bytes(n, d))?;
    file.write_all(&f32s_to_le(data))?;
    file.flush()?;
    Ok(())
}

/// Extracts the text between the quotes/parens following `key` in a
/// Python dict literal.
fn dict_value<'a>(dict: &'a str, key: &str) -> Result<&'a str> {
    let pat = format!("'{key}'");
    let at = dict
        .find(&pat)
        .ok_or_else(|| Error::BadFormat(format!("header lacks {key}")))?;
    let rest = dict[at + pat.len()..].trim_start();
    let rest = rest
        .strip_prefix(':')
        .ok_or_else(|| Error::BadFormat(format!("malformed {key} entry")))?
        .trim_start();
    let end = match rest.chars().next() {
        Some('\'') | Some('"') => {
            let q = rest.as_bytes()[0] as char;
            return rest[1..]
                .find(q)
                .map(|e| &rest[1..1 + e])
                .ok_or_else(|| Error::BadFormat(format!("unterminated {key}")));
        }
        Some('(') => rest.find(')').map(|e| e + 1),
        _ => rest.find([',', '}']),
    };
    let end = end.ok_or_else(|| Error::BadFormat(format!("unterminated {key}")))?;
    Ok(rest[..end].trim())
}

pub fn parse_npy_header(bytes: &[u8]) -> Result<(NpyHeader, usize)> {
    if bytes.len() < 10 || &bytes[..6] != NPY_MAGIC {
        return Err(Error::BadFormat("missing NPY magic".into()));
    }
    let (len, start) = match bytes[6] {
        1 => (u16::from_le_bytes([bytes[8], bytes[9]]) as usize, 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(Error::BadFormat("truncated NPY header".into()));
            }
            (
                u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize,
                12,
            )
        }
        v => return Err(Error::BadFormat(format!("unsupported NPY version {v}"))),
    };
    let end = start + len;
    if bytes.len() < end {
        return Err(Error::BadFormat("truncated NPY header".into()));
    }
    let dict = std::str::from_utf8(&bytes[start..end])
        .map_err(|_| Error::BadFormat("header is not text".into()))?;

    let descr = dict_value(dict, "descr")?.to_string();
    let fortran_order = match dict_value(dict, "fortran_order")? {
        "False" => false,
        "True" => true,
        other => return Err(Error::BadFormat(format!("fortran_order = {other}"))),
    };
    let shape_text = dict_value(dict, "shape")?;
    let shape = shape_text
        .trim_matches(|c| c == '(' || c == ')')
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<usize>()
                .map_err(|_| Error::BadFormat(format!("shape {shape_text}")))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((
        NpyHeader {
            descr,
            fortran_order,
            shape,
        },
        end,
    ))
}

/// Reads a 2-D little-endian float32 NPY file.
pub fn read_npy(path: impl AsRef<Path>) -> Result<(Vec<f32>, usize, usize)> {
    let bytes = fs::read(path)?;
    decode_npy(&bytes)
}

pub fn decode_npy(bytes: &[u8]) -> Result<(Vec<f32>, usize, usize)> {
    let (header, offset) = parse_npy_header(bytes)?;
    if header.fortran_order {
        return Err(Error::UnsupportedLayout(
            "column-major (fortran_order) arrays".into(),
        ));
    }
    if header.descr != "<f4" {
        return Err(Error::UnsupportedLayout(format!(
            "element type {} (need little-endian float32 '<f4')",
            header.descr
        )));
    }
    let [n, d] = header.shape[..] else {
        return Err(Error::UnsupportedLayout(format!(
            "{}-D array (need 2-D)",
            header.shape.len()
        )));
    };
    let body = &bytes[offset..];
    if body.len() != 4 * n * d {
        return Err(Error::BadFormat(format!(
            "payload is {} bytes, shape ({n}, {d}) needs {}",
            body.len(),
            4 * n * d
        )));
    }
    Ok((le_to_f32s(body), n, d))
}

pub fn write_raw(path: impl AsRef<Path>, data: &[f32]) -> Result<()> {
    fs::write(path, f32s_to_le(data))?;
    Ok(())
}

/// Reads a headerless little-endian float32 file with `d` columns. `n` is
/// checked when given, otherwise inferred from the file length.
pub fn read_raw(
    path: impl AsRef<Path>,
    n: Option<usize>,
    d: usize,
) -> Result<(Vec<f32>, usize, usize)> {
    let bytes = fs::read(path)?;
    if d == 0 || bytes.len() % (4 * d) != 0 {
        return Err(Error::BadFormat(format!(
            "{} bytes is not a whole number of {d}-column float32 rows",
            bytes.len()
        )));
    }
    let rows = bytes.len() / (4 * d);
    if let Some(n) = n {
        if n != rows {
            return Err(Error::BadFormat(format!(
                "file holds {rows} rows, expected {n}"
            )));
        }
    }
    Ok((le_to_f32s(&bytes), rows, d))
}

/// Reads an NPY file, or a raw float32 file when `shape` is supplied and the
/// file carries no NPY magic.
pub fn read_array(
    path: impl AsRef<Path>,
    shape: Option<(Option<usize>, usize)>,
) -> Result<(Vec<f32>, usize, usize)> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    if bytes.starts_with(NPY_MAGIC) {
        return decode_npy(&bytes);
    }
    match shape {
        Some((n, d)) => read_raw(path, n, d),
        None => Err(Error::BadFormat(format!(
            "{} is not an NPY file; pass a shape to read it as raw float32",
            path.display()
        ))),
    }
}

/// Writes NPY when the path ends in `.npy`, raw float32 otherwise.
pub fn write_array(path: impl AsRef<Path>, data: &[f32], n: usize, d: usize) -> Result<()> {
    let path = path.as_ref();
    if path
        .extension()
        .is_some_and(|e| e.eq_ignore_ascii_case("npy"))
    {
        write_npy(path, data, n, d)
    } else {
        if data.len() != n * d {
            return Err(Error::LengthMismatch {
                expected: n * d,
                actual: data.len(),
            });
        }
        write_raw(path, data)
    }
}
