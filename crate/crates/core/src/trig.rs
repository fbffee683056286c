//! Binary64 `sin_cos` and `acos` for the transform hot loops.
//!
//! `sin_cos` reduces by `π/2` with a two-part Cody–Waite constant and
//! evaluates the fdlibm minimax kernels on `[−π/4, π/4]`; it is within a
//! couple of ulps for `|x| ≤ 2^20` and defers to the standard library
//! elsewhere. `acos_slice` is the fdlibm rational approximation.

#![allow(clippy::excessive_precision)]

use std::f64::consts::{FRAC_2_PI, FRAC_PI_2, PI};

/// First 33 bits of π/2.
const PIO2_HI: f64 = 1.57079632673412561417e+00;
/// π/2 − PIO2_HI.
const PIO2_LO: f64 = 6.07710050650619224932e-11;

const S1: f64 = -1.66666666666666324348e-01;
const S2: f64 = 8.33333333332248946124e-03;
const S3: f64 = -1.98412698298579493134e-04;
const S4: f64 = 2.75573137070700676789e-06;
const S5: f64 = -2.50507602534068634195e-08;
const S6: f64 = 1.58969099521155010221e-10;

const C1: f64 = 4.16666666666666019037e-02;
const C2: f64 = -1.38888888888741095749e-03;
const C3: f64 = 2.48015872894767294178e-05;
const C4: f64 = -2.75573143513906633035e-07;
const C5: f64 = 2.08757232129817482790e-09;
const C6: f64 = -1.13596475577881948265e-11;

const REDUCTION_LIMIT: f64 = 1048576.0;
/// 1.5 · 2^52: adding and subtracting it rounds `|v| < 2^51` to an integer.
const ROUND_MAGIC: f64 = 6755399441055744.0;

#[inline(always)]
fn kernel_sin(x: f64) -> f64 {
    let z = x * x;
    let r = S2 + z * (S3 + z * (S4 + z * (S5 + z * S6)));
    x + x * z * (S1 + z * r)
}

#[inline(always)]
fn kernel_cos(x: f64) -> f64 {
    let z = x * x;
    let r = z * (C1 + z * (C2 + z * (C3 + z * (C4 + z * (C5 + z * C6)))));
    let hz = 0.5 * z;
    let w = 1.0 - hz;
    w + (((1.0 - w) - hz) + z * r)
}

/// Branch-free `(sin x, cos x)` for `|x| ≤ REDUCTION_LIMIT`.
#[inline(always)]
fn sin_cos_reduced(x: f64) -> (f64, f64) {
    let t = x * FRAC_2_PI + ROUND_MAGIC;
    // The low mantissa bits of t hold the quadrant k in two's complement.
    let q = t.to_bits();
    let k = t - ROUND_MAGIC;
    let r = (x - k * PIO2_HI) - k * PIO2_LO;
    let (s, c) = (kernel_sin(r).to_bits(), kernel_cos(r).to_bits());
    // Odd quadrants swap sin/cos; sin is negative for q ∈ {2, 3}, cos for
    // q ∈ {1, 2}.
    let swap = (q & 1).wrapping_neg();
    let sin_sign = (q & 2) << 62;
    let cos_sign = (q.wrapping_add(1) & 2) << 62;
    (
        f64::from_bits(((s & !swap) | (c & swap)) ^ sin_sign),
        f64::from_bits(((c & !swap) | (s & swap)) ^ cos_sign),
    )
}

/// `(sin x, cos x)`.
#[inline]
pub fn sin_cos(x: f64) -> (f64, f64) {
    if x.abs() <= REDUCTION_LIMIT {
        sin_cos_reduced(x)
    } else {
        x.sin_cos()
    }
}

/// Runs `$body` through an AVX2 copy of itself when the CPU has AVX2.
/// FMA stays disabled, so both copies produce identical bits.
macro_rules! avx2_dispatch {
    (($($arg:ident: $ty:ty),*) $body:block) => {{
        #[inline(always)]
        fn portable($($arg: $ty),*) $body

        #[cfg(target_arch = "x86_64")]
        #[target_feature(enable = "avx2")]
        unsafe fn avx2($($arg: $ty),*) {
            portable($($arg),*)
        }

        #[cfg(target_arch = "x86_64")]
        if std::arch::is_x86_feature_detected!("avx2") {
            // SAFETY: AVX2 support was detected at runtime.
            return unsafe { avx2($($arg),*) };
        }
        portable($($arg),*)
    }};
}

/// Element-wise [`sin_cos`] of `x` into `sin` and `cos`.
pub fn sin_cos_slice(x: &[f64], sin: &mut [f64], cos: &mut [f64]) {
    assert!(sin.len() == x.len() && cos.len() == x.len());
    avx2_dispatch!((x: &[f64], sin: &mut [f64], cos: &mut [f64]) {
        sin_cos_all(x, sin, cos)
    })
}

#[inline(always)]
fn sin_cos_all(x: &[f64], sin: &mut [f64], cos: &mut [f64]) {
    if x.iter().all(|v| v.abs() <= REDUCTION_LIMIT) {
        for ((v, s), c) in x.iter().zip(sin.iter_mut()).zip(cos.iter_mut()) {
            (*s, *c) = sin_cos_reduced(*v);
        }
    } else {
        for ((v, s), c) in x.iter().zip(sin.iter_mut()).zip(cos.iter_mut()) {
            (*s, *c) = sin_cos(*v);
        }
    }
}

const PIO2_LO_ACOS: f64 = 6.12323399573676603587e-17;
const PS0: f64 = 1.66666666666666657415e-01;
const PS1: f64 = -3.25565818622400915405e-01;
const PS2: f64 = 2.01212532134862925881e-01;
const PS3: f64 = -4.00555345006794114027e-02;
const PS4: f64 = 7.91534994289814532176e-04;
const PS5: f64 = 3.47933107596021167570e-05;
const QS1: f64 = -2.40339491173441421878e+00;
const QS2: f64 = 2.02094576023350569471e+00;
const QS3: f64 = -6.88283971605453293030e-01;
const QS4: f64 = 7.70381505559019352791e-02;

/// Rational kernel `p(z)/q(z)` shared by every `acos` branch.
#[inline(always)]
fn acos_ratio(z: f64) -> f64 {
    let p = z * (PS0 + z * (PS1 + z * (PS2 + z * (PS3 + z * (PS4 + z * PS5)))));
    let q = 1.0 + z * (QS1 + z * (QS2 + z * (QS3 + z * QS4)));
    p / q
}

/// Element-wise `arccos` for inputs already clamped to `[−1, 1]`.
///
/// The fdlibm rational approximation: `|x| < 0.5` uses `z = x²`, otherwise
/// `z = (1 − |x|)/2` with `√z`. All branches are evaluated and selected per
/// lane so the loop vectorizes.
pub fn acos_slice(x: &[f64], out: &mut [f64]) {
    assert_eq!(x.len(), out.len());
    avx2_dispatch!((x: &[f64], out: &mut [f64]) {
        acos_all(x, out)
    })
}

#[inline(always)]
fn acos_all(x: &[f64], out: &mut [f64]) {
    for (v, o) in x.iter().zip(out.iter_mut()) {
        let v = *v;
        let ax = v.abs();
        let small = ax < 0.5;
        let z = if small { v * v } else { (1.0 - ax) * 0.5 };
        let r = acos_ratio(z);
        let s = z.sqrt();
        let near_zero = FRAC_PI_2 - (v - (PIO2_LO_ACOS - v * r));
        let negative = PI - 2.0 * (s + (r * s - PIO2_LO_ACOS));
        let df = f64::from_bits(s.to_bits() & 0xFFFF_FFFF_0000_0000);
        let denom = s + df;
        let c = if denom > 0.0 {
            (z - df * df) / denom
        } else {
            0.0
        };
        let positive = 2.0 * (df + (r * s + c));
        *o = if small {
            near_zero
        } else if v < 0.0 {
            negative
        } else {
            positive
        };
    }
}
