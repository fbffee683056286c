//! Hyperspherical coordinate transforms.
//!
//! A unit vector `x ∈ R^d` maps to `d − 1` angles. Polar angles
//! `θ_i = arccos(x_i / r_i)` use the tail norm `r_i = ‖x_{i..d}‖`, and the
//! last angle is the azimuth `atan2(x_d, x_{d−1})`. The tail norms come from
//! one backward pass, `r²_i = r²_{i+1} + x_i²`, so a row costs `O(d)`.
//!
//! All intermediate arithmetic is binary64; only the stored angles and the
//! reconstructed coordinates are rounded to the storage scalar.

use std::f64::consts::{FRAC_PI_2, PI};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{AngleMatrix, EmbeddingMatrix};
use crate::scalar::Scalar;

/// Default accepted `|‖x‖ − 1|` before a row counts as a norm violation.
pub const DEFAULT_NORM_TOLERANCE: f64 = 1e-3;

/// Per-row binary64 working state, reused across rows by one worker.
#[derive(Debug, Clone, Default)]
pub struct TransformScratch {
    /// `r²_i`, the squared norm of `x_i..x_d`.
    pub partial_sq_norms: Vec<f64>,
    /// `x_i / r_i` clamped to `[−1, 1]`, or `0` where the tail is all zeros.
    pub cosines: Vec<f64>,
    /// Polar angles before rounding to the storage scalar.
    pub polar: Vec<f64>,
}

impl TransformScratch {
    pub fn with_dim(d: usize) -> Self {
        Self {
            partial_sq_norms: vec![0.0; d],
            cosines: vec![0.0; d],
            polar: vec![0.0; d],
        }
    }
}

/// Per-row Euclidean norms of a raw matrix.
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct NormReport {
    pub norms: Vec<f64>,
    pub max_deviation: f64,
    pub violations: usize,
}

fn first_non_finite<T: Scalar>(values: &[T]) -> Option<usize> {
    values.iter().position(|v| !v.is_finite())
}

/// Exact `(sin, cos)` for stored values that are the nearest representable
/// neighbours of `±π/2` and `±π`, so axis-aligned components reconstruct as
/// exact zeros and ones.
#[inline]
fn quadrant_snap<T: Scalar>(a: f64) -> Option<(f64, f64)> {
    let half_pi = T::from_f64_round(FRAC_PI_2).widen();
    let pi = T::from_f64_round(PI).widen();
    if a == half_pi {
        Some((1.0, 0.0))
    } else if a == -half_pi {
        Some((-1.0, 0.0))
    } else if a == pi || a == -pi {
        Some((0.0, -1.0))
    } else {
        None
    }
}

/// [`quadrant_snap`] over a block, written as per-lane selects.
#[inline]
fn quadrant_snap_slice<T: Scalar>(a: &[f64], sin: &mut [f64], cos: &mut [f64]) {
    let half_pi = T::from_f64_round(FRAC_PI_2).widen();
    let pi = T::from_f64_round(PI).widen();
    for ((v, s), c) in a.iter().zip(sin.iter_mut()).zip(cos.iter_mut()) {
        let v = *v;
        let axis = v.abs() == half_pi;
        let flat = v.abs() == pi;
        *s = if axis {
            v.signum()
        } else if flat {
            0.0
        } else {
            *s
        };
        *c = if axis {
            0.0
        } else if flat {
            -1.0
        } else {
            *c
        };
    }
}

/// `(sin θ, cos θ)` for a stored angle, with [`quadrant_snap`] applied.
#[inline]
fn stored_sin_cos<T: Scalar>(angle: T) -> (f64, f64) {
    let a = angle.widen();
    quadrant_snap::<T>(a).unwrap_or_else(|| crate::trig::sin_cos(a))
}

/// Angles per block in the inverse transform.
const SINCOS_BLOCK: usize = 64;

/// Converts one Cartesian row into `d − 1` angles.
///
/// `x` must be finite with `x.len() ≥ 2`, and `out.len() == x.len() − 1`.
pub fn row_to_spherical<T: Scalar>(x: &[T], out: &mut [T], scratch: &mut TransformScratch) {
    let d = x.len();
    debug_assert!(d >= 2 && out.len() == d - 1);
    scratch.partial_sq_norms.resize(d, 0.0);
    scratch.cosines.resize(d, 0.0);
    scratch.polar.resize(d, 0.0);
    let r2 = &mut scratch.partial_sq_norms;
    let cosines = &mut scratch.cosines[..d - 2];
    let polar = &mut scratch.polar[..d - 2];

    let mut acc = 0.0f64;
    for i in (0..d).rev() {
        let v = x[i].widen();
        acc += v * v;
        r2[i] = acc;
    }

    // An all-zero tail gets cosine 0, i.e. θ = π/2; the sine product before
    // it is already zero, so any angle reconstructs the same zeros.
    for ((c, v), r) in cosines.iter_mut().zip(x).zip(r2.iter()) {
        // max/min rather than clamp: this form vectorizes.
        #[allow(clippy::manual_clamp)]
        let q = (v.widen() / r.sqrt()).max(-1.0).min(1.0);
        *c = if *r > 0.0 { q } else { 0.0 };
    }
    crate::trig::acos_slice(cosines, polar);
    for (o, t) in out.iter_mut().zip(polar.iter()) {
        *o = T::from_f64_round(*t);
    }

    let a = x[d - 2].widen();
    let b = x[d - 1].widen();
    let phi = if a == 0.0 && b == 0.0 {
        0.0
    } else {
        b.atan2(a)
    };
    out[d - 2] = T::from_f64_round(phi);
}

/// Reconstructs one Cartesian row from its `d − 1` angles.
pub fn row_from_spherical<T: Scalar>(angles: &[T], out: &mut [T]) {
    let w = angles.len();
    debug_assert!(w >= 1 && out.len() == w + 1);
    let mut wide = [0.0f64; SINCOS_BLOCK];
    let mut sin = [0.0f64; SINCOS_BLOCK];
    let mut cos = [0.0f64; SINCOS_BLOCK];
    let mut s = 1.0f64;
    for (block, dst) in angles
        .chunks(SINCOS_BLOCK)
        .zip(out.chunks_mut(SINCOS_BLOCK))
    {
        let len = block.len();
        let (wide, sin, cos) = (&mut wide[..len], &mut sin[..len], &mut cos[..len]);
        for (v, a) in wide.iter_mut().zip(block) {
            *v = a.widen();
        }
        crate::trig::sin_cos_slice(wide, sin, cos);
        quadrant_snap_slice::<T>(wide, sin, cos);
        for ((o, c), sn) in dst.iter_mut().zip(cos.iter()).zip(sin.iter()) {
            *o = T::from_f64_round(s * c);
            s *= sn;
        }
    }
    // After the azimuth, s = s_{d−1} · sin φ, which is the final coordinate.
    out[w] = T::from_f64_round(s);
}

/// Forward transform of every row. Rows are processed in parallel; the
/// result is identical to sequential evaluation.
pub fn to_spherical<T: Scalar>(x: &EmbeddingMatrix<T>) -> Result<AngleMatrix<T>> {
    let d = x.d();
    if d < 2 {
        return Err(Error::DimensionTooSmall { d });
    }
    if let Some(index) = first_non_finite(x.as_slice()) {
        return Err(Error::NonFiniteInput { index });
    }
    AngleMatrix::from_vec(x.n(), d - 1, rows_to_spherical(x.as_slice(), d))
}

/// Row-major angles of a finite row-major matrix with `d ≥ 2` columns.
pub(crate) fn rows_to_spherical<T: Scalar>(data: &[T], d: usize) -> Vec<T> {
    let w = d - 1;
    let mut angles = vec![T::zero(); data.len() / d * w];
    angles
        .par_chunks_exact_mut(w)
        .zip(data.par_chunks_exact(d))
        .for_each_init(
            || TransformScratch::with_dim(d),
            |scratch, (out, row)| row_to_spherical(row, out, scratch),
        );
    angles
}

/// Inverse transform of every row.
pub fn from_spherical<T: Scalar>(theta: &AngleMatrix<T>) -> Result<EmbeddingMatrix<T>> {
    if let Some(index) = first_non_finite(theta.as_slice()) {
        return Err(Error::NonFiniteInput { index });
    }
    let w = theta.width();
    let d = w + 1;
    let mut data = vec![T::zero(); theta.n() * d];
    data.par_chunks_exact_mut(d)
        .zip(theta.as_slice().par_chunks_exact(w))
        .for_each(|(out, angles)| row_from_spherical(angles, out));
    EmbeddingMatrix::from_vec(theta.n(), d, data)
}

/// Dot product `x · y` of two unit vectors computed from their angles alone,
/// via the backward recurrence
/// `R ← cos θ_k cos φ_k + sin θ_k sin φ_k · R`, seeded with
/// `cos(θ_{d−1} − φ_{d−1})`.
pub fn angle_similarity<T: Scalar>(theta: &[T], phi: &[T]) -> Result<f64> {
    if theta.len() != phi.len() {
        return Err(Error::LengthMismatch {
            expected: theta.len(),
            actual: phi.len(),
        });
    }
    let w = theta.len();
    if w == 0 {
        return Err(Error::DimensionTooSmall { d: 1 });
    }
    let mut r = (theta[w - 1].widen() - phi[w - 1].widen()).cos();
    for k in (0..w - 1).rev() {
        let (st, ct) = stored_sin_cos(theta[k]);
        let (sp, cp) = stored_sin_cos(phi[k]);
        r = ct * cp + st * sp * r;
    }
    Ok(r)
}

fn row_norm<T: Scalar>(row: &[T]) -> f64 {
    let mut lanes = [0.0f64; 4];
    let mut quads = row.chunks_exact(4);
    for q in &mut quads {
        for (l, v) in lanes.iter_mut().zip(q) {
            *l += v.widen() * v.widen();
        }
    }
    let tail: f64 = quads
        .remainder()
        .iter()
        .map(|v| v.widen() * v.widen())
        .sum();
    ((lanes[0] + lanes[1]) + (lanes[2] + lanes[3]) + tail).sqrt()
}

/// Row norms of a finite raw `n × d` matrix and how many rows deviate from
/// unit length by more than `tolerance`.
pub fn norm_report<T: Scalar>(
    data: &[T],
    n: usize,
    d: usize,
    tolerance: f64,
) -> Result<NormReport> {
    if tolerance.is_nan() || tolerance <= 0.0 {
        return Err(Error::InvalidTolerance(tolerance));
    }
    if d < 2 {
        return Err(Error::DimensionTooSmall { d });
    }
    if data.len() != n * d {
        return Err(Error::LengthMismatch {
            expected: n * d,
            actual: data.len(),
        });
    }
    if let Some(index) = first_non_finite(data) {
        return Err(Error::NonFiniteInput { index });
    }

    let norms: Vec<f64> = data.par_chunks_exact(d).map(row_norm).collect();
    let max_deviation = norms.iter().map(|r| (r - 1.0).abs()).fold(0.0, f64::max);
    let violations = norms
        .iter()
        .filter(|r| (*r - 1.0).abs() > tolerance)
        .count();
    Ok(NormReport {
        norms,
        max_deviation,
        violations,
    })
}

/// Validates row norms of a raw `n × d` matrix, optionally renormalizing.
///
/// Without `renormalize`, any row with `|‖x‖ − 1| > tolerance` rejects the
/// whole matrix. With it, every row is divided by its norm (zero rows are an
/// error) and the original norms are kept in the report.
pub fn check_norms<T: Scalar>(
    data: &[T],
    n: usize,
    d: usize,
    tolerance: f64,
    renormalize: bool,
) -> Result<(EmbeddingMatrix<T>, NormReport)> {
    let report = norm_report(data, n, d, tolerance)?;
    let (violations, max_deviation) = (report.violations, report.max_deviation);

    if !renormalize {
        if violations > 0 {
            return Err(Error::NormViolation {
                count: violations,
                max_deviation,
            });
        }
        return Ok((EmbeddingMatrix::from_vec(n, d, data.to_vec())?, report));
    }

    if let Some(row) = report.norms.iter().position(|r| *r == 0.0) {
        return Err(Error::ZeroNormRow { row });
    }
    let mut out = data.to_vec();
    out.par_chunks_exact_mut(d)
        .zip(report.norms.par_iter())
        .for_each(|(row, norm)| {
            for v in row {
                *v = T::from_f64_round(v.widen() / norm);
            }
        });
    Ok((EmbeddingMatrix::from_vec(n, d, out)?, report))
}
