//! Transpose + byte-plane shuffle, and mantissa truncation.
//!
//! A chunk of `m` rows × `w` values is first read column by column (all
//! values of position 0, then position 1, ...), then split into four byte
//! planes of the little-endian encoding: plane 0 holds every least
//! significant byte, plane 3 the sign and high exponent bits.

use std::ops::Range;

use crate::error::{Error, Result};

/// Bytes per stored element.
pub const ELEMENT_BYTES: usize = 4;

/// Largest number of low mantissa bits that may be zeroed.
pub const MAX_TRUNCATE_BITS: u32 = 22;

/// Side of the square tiles used by the transpose.
const TILE: usize = 32;

/// Transposes a row-major `m × w` chunk and splits it into byte planes.
pub fn shuffle_filter(chunk: &[f32], m: usize, w: usize) -> Vec<u8> {
    assert_eq!(chunk.len(), m * w, "chunk shape mismatch");
    let count = m * w;
    let mut columns = vec![0u32; count];
    for r0 in (0..m).step_by(TILE) {
        let r1 = (r0 + TILE).min(m);
        for c0 in (0..w).step_by(TILE) {
            let c1 = (c0 + TILE).min(w);
            for r in r0..r1 {
                for (j, v) in chunk[r * w + c0..r * w + c1].iter().enumerate() {
                    columns[(c0 + j) * m + r] = v.to_bits();
                }
            }
        }
    }
    let mut out = vec![0u8; count * ELEMENT_BYTES];
    let (p0, rest) = out.split_at_mut(count);
    let (p1, rest) = rest.split_at_mut(count);
    let (p2, p3) = rest.split_at_mut(count);
    for ((((b, a0), a1), a2), a3) in columns.iter().zip(p0).zip(p1).zip(p2).zip(p3) {
        *a0 = *b as u8;
        *a1 = (*b >> 8) as u8;
        *a2 = (*b >> 16) as u8;
        *a3 = (*b >> 24) as u8;
    }
    out
}

/// Rows per block when undoing the shuffle.
pub const ROW_BLOCK: usize = TILE;

/// Inverse of [`shuffle_filter`].
pub fn unshuffle_filter(buf: &[u8], m: usize, w: usize) -> Result<Vec<f32>> {
    let count = m * w;
    if buf.len() != count * ELEMENT_BYTES {
        return Err(Error::LengthMismatch {
            expected: count * ELEMENT_BYTES,
            actual: buf.len(),
        });
    }
    let mut out = vec![0f32; count];
    for (b, block) in out.chunks_mut(ROW_BLOCK * w.max(1)).enumerate() {
        let start = b * ROW_BLOCK;
        unshuffle_rows(buf, m, w, start..start + block.len() / w.max(1), block);
    }
    Ok(out)
}

/// Writes rows `rows` of a shuffled `m × w` chunk row-major into `out`.
///
/// `buf.len()` must be `4·m·w`, `rows.end ≤ m`, and `out.len() == rows.len()·w`.
pub fn unshuffle_rows(buf: &[u8], m: usize, w: usize, rows: Range<usize>, out: &mut [f32]) {
    let count = m * w;
    assert!(buf.len() == count * ELEMENT_BYTES && rows.end <= m && out.len() == rows.len() * w);
    let (p0, rest) = buf.split_at(count);
    let (p1, rest) = rest.split_at(count);
    let (p2, p3) = rest.split_at(count);
    for c in 0..w {
        let span = c * m + rows.start..c * m + rows.end;
        let lanes = p0[span.clone()]
            .iter()
            .zip(&p1[span.clone()])
            .zip(&p2[span.clone()])
            .zip(&p3[span]);
        for (i, (((a0, a1), a2), a3)) in lanes.enumerate() {
            out[i * w + c] = f32::from_le_bytes([*a0, *a1, *a2, *a3]);
        }
    }
}

fn truncation_mask(k: u32) -> Result<u32> {
    if k > MAX_TRUNCATE_BITS {
        return Err(Error::BitCountOutOfRange(k));
    }
    Ok(!((1u32 << k) - 1))
}

/// Zeroes the `k` least significant mantissa bits of every value in place.
pub fn truncate_mantissa_in_place(values: &mut [f32], k: u32) -> Result<()> {
    let mask = truncation_mask(k)?;
    if k > 0 {
        for v in values {
            *v = f32::from_bits(v.to_bits() & mask);
        }
    }
    Ok(())
}

/// Copying variant of [`truncate_mantissa_in_place`].
pub fn truncate_mantissa(values: &[f32], k: u32) -> Result<Vec<f32>> {
    let mut out = values.to_vec();
    truncate_mantissa_in_place(&mut out, k)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_value_layout() {
        let a = f32::from_le_bytes([0xa0, 0xa1, 0xa2, 0xa3]);
        let b = f32::from_le_bytes([0xb0, 0xb1, 0xb2, 0xb3]);
        assert_eq!(
            shuffle_filter(&[a, b], 1, 2),
            vec![0xa0, 0xb0, 0xa1, 0xb1, 0xa2, 0xb2, 0xa3, 0xb3]
        );
        let back =
            unshuffle_filter(&[0xa0, 0xb0, 0xa1, 0xb1, 0xa2, 0xb2, 0xa3, 0xb3], 1, 2).unwrap();
        assert_eq!(back[0].to_bits(), a.to_bits());
        assert_eq!(back[1].to_bits(), b.to_bits());
    }

    #[test]
    fn single_value_is_identity() {
        let v = 1.2345f32;
        assert_eq!(shuffle_filter(&[v], 1, 1), v.to_le_bytes().to_vec());
    }

    #[test]
    fn transposes_before_splitting() {
        // 2 rows × 2 cols: column-major order is r0c0, r1c0, r0c1, r1c1.
        let vals: Vec<f32> = (0..4u32).map(|i| f32::from_bits(i + 1)).collect();
        let buf = shuffle_filter(&vals, 2, 2);
        assert_eq!(&buf[..4], &[1, 3, 2, 4]);
        assert!(buf[4..].iter().all(|b| *b == 0));
    }

    #[test]
    fn zero_buffer_and_bad_length() {
        let out = unshuffle_filter(&[0u8; 24], 2, 3).unwrap();
        assert!(out.iter().all(|v| v.to_bits() == 0));
        assert!(matches!(
            unshuffle_filter(&[0u8; 23], 2, 3),
            Err(Error::LengthMismatch {
                expected: 24,
                actual: 23
            })
        ));
    }

    #[test]
    fn roundtrip_100x767() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let vals: Vec<f32> = (0..100 * 767)
            .map(|_| rng.random_range(0.0..std::f32::consts::PI))
            .collect();
        let back = unshuffle_filter(&shuffle_filter(&vals, 100, 767), 100, 767).unwrap();
        assert!(vals
            .iter()
            .zip(&back)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncation_examples() {
        let v = f32::from_bits(0x3F80_0001);
        assert_eq!(
            truncate_mantissa(&[v], 1).unwrap()[0].to_bits(),
            0x3F80_0000
        );
        assert_eq!(
            truncate_mantissa(&[v], 0).unwrap()[0].to_bits(),
            v.to_bits()
        );
        assert!(matches!(
            truncate_mantissa(&[v], 23),
            Err(Error::BitCountOutOfRange(23))
        ));
        let neg = f32::from_bits(0xBF80_00FF);
        assert_eq!(
            truncate_mantissa(&[neg], 22).unwrap()[0].to_bits(),
            0xBF80_0000
        );
    }

    fn naive_shuffle(chunk: &[f32], m: usize, w: usize) -> Vec<u8> {
        let mut out = vec![0u8; 4 * m * w];
        for r in 0..m {
            for c in 0..w {
                for (k, b) in chunk[r * w + c].to_le_bytes().iter().enumerate() {
                    out[k * m * w + c * m + r] = *b;
                }
            }
        }
        out
    }

    #[test]
    fn row_windows_match_full_unshuffle() {
        let (m, w) = (70, 9);
        let vals: Vec<f32> = (0..m * w).map(|i| i as f32 * 0.5).collect();
        let buf = shuffle_filter(&vals, m, w);
        for rows in [0..1, 5..37, 69..70, 0..70] {
            let mut out = vec![0f32; rows.len() * w];
            unshuffle_rows(&buf, m, w, rows.clone(), &mut out);
            assert_eq!(out, vals[rows.start * w..rows.end * w]);
        }
    }

    #[test]
    fn tiled_matches_naive_on_ragged_shapes() {
        for (m, w) in [(1, 1), (31, 33), (32, 32), (65, 7), (3, 100), (100, 767)] {
            let vals: Vec<f32> = (0..m * w)
                .map(|i| f32::from_bits(0x9E37_79B9u32.wrapping_mul(i as u32 + 1)))
                .collect();
            assert_eq!(
                shuffle_filter(&vals, m, w),
                naive_shuffle(&vals, m, w),
                "{m}x{w}"
            );
        }
    }

    proptest! {
        #[test]
        fn shuffle_roundtrip(bits in prop::collection::vec(any::<u32>(), 1..300), w in 1usize..7) {
            let m = bits.len() / w;
            prop_assume!(m >= 1);
            let vals: Vec<f32> = bits[..m * w].iter().map(|b| f32::from_bits(*b)).collect();
            let back = unshuffle_filter(&shuffle_filter(&vals, m, w), m, w).unwrap();
            prop_assert!(vals.iter().zip(&back).all(|(a, b)| a.to_bits() == b.to_bits()));
        }

        #[test]
        fn truncation_in_unit_interval(x in 1.0f32..2.0) {
            let t = truncate_mantissa(&[x], 6).unwrap()[0];
            prop_assert!(t <= x);
            prop_assert!(((x - t) as f64) < 2f64.powi(-17));
            prop_assert_eq!(t.to_bits() >> 23, x.to_bits() >> 23);
        }
    }
}
