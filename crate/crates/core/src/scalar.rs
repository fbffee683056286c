//! Storage scalar abstraction.
//!
//! Matrices store their elements in a [`Scalar`] type (`f32` or `f64`), while
//! every transcendental evaluation runs in binary64 regardless of storage.

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point element type that a matrix can store: f32 or f64.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Default + Send + Sync + std::fmt::Debug + 'static
{
    /// Short dtype name, e.g. `"f32"`.
    const NAME: &'static str;

    /// Rounds a binary64 value to the storage type (round-to-nearest).
    fn from_f64_round(v: f64) -> Self;

    fn widen(self) -> f64;
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    #[inline]
    fn from_f64_round(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn widen(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    #[inline]
    fn from_f64_round(v: f64) -> Self {
        v
    }

    #[inline]
    fn widen(self) -> f64 {
        self
    }
}

/// Spacing between 1.0 and the next binary32 value, 2^-23.
pub const F32_EPSILON: f64 = f32::EPSILON as f64;
