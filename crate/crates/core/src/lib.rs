//! Lossy-at-machine-epsilon compression of unit-norm float32 embeddings.
//!
//! Rows are mapped to hyperspherical angles, which cluster around `π/2` in
//! high dimension and therefore share one binary32 exponent. The angles are
//! transposed, byte-shuffled and Zstandard-coded in independent row chunks.
//!
//! ```
//! use sphc::{codec, synth};
//!
//! let x = synth::gen_uniform(64, 128, 7);
//! let bytes = codec::compress_matrix(&x, &codec::CodecOptions::default()).unwrap();
//! let back = codec::decompress(&bytes, None).unwrap();
//! assert_eq!(back.n, 64);
//! ```

pub mod analysis;
pub mod codec;
pub mod error;
pub mod matrix;
pub mod scalar;
pub mod synth;
pub mod transform;
mod trig;

pub use error::{Error, Result};
pub use matrix::{AngleMatrix, EmbeddingMatrix};
pub use scalar::Scalar;

/// Single-precision embeddings, the codec's storage format.
pub type Embeddings32 = EmbeddingMatrix<f32>;
/// Single-precision angles as stored in containers.
pub type Angles32 = AngleMatrix<f32>;
pub type Embeddings64 = EmbeddingMatrix<f64>;
pub type Angles64 = AngleMatrix<f64>;
