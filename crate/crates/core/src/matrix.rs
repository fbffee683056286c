//! Row-major embedding and angle matrices.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// `n × d` row-major matrix of unit-norm vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix<T> {
    n: usize,
    d: usize,
    data: Vec<T>,
}

impl<T: Scalar> EmbeddingMatrix<T> {
    /// Wraps row-major data without checking norms. Use
    /// [`check_norms`](crate::transform::check_norms) to validate raw input.
    pub fn from_vec(n: usize, d: usize, data: Vec<T>) -> Result<Self> {
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
        Ok(Self { n, d, data })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n, self.d)
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.d..(i + 1) * self.d]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.data.chunks_exact(self.d)
    }

    /// Copies rows `start..end` into a new matrix.
    pub fn slice_rows(&self, start: usize, end: usize) -> Result<Self> {
        if start >= end || end > self.n {
            return Err(Error::RangeOutOfBounds {
                start,
                end,
                n: self.n,
            });
        }
        Ok(Self {
            n: end - start,
            d: self.d,
            data: self.data[start * self.d..end * self.d].to_vec(),
        })
    }
}

/// `n × (d−1)` row-major matrix of spherical angles in radians.
///
/// Columns `0..d−2` hold polar angles in `[0, π]`; the last column holds the
/// azimuth in `[−π, π]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AngleMatrix<T> {
    n: usize,
    width: usize,
    angles: Vec<T>,
}

impl<T: Scalar> AngleMatrix<T> {
    pub fn from_vec(n: usize, width: usize, angles: Vec<T>) -> Result<Self> {
        if width == 0 {
            return Err(Error::DimensionTooSmall { d: width + 1 });
        }
        if n == 0 {
            return Err(Error::EmptyInput);
        }
        if angles.len() != n * width {
            return Err(Error::LengthMismatch {
                expected: n * width,
                actual: angles.len(),
            });
        }
        Ok(Self { n, width, angles })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Angles per row, `d − 1`.
    pub fn width(&self) -> usize {
        self.width
    }

    /// Dimension of the Cartesian vectors these angles describe.
    pub fn d(&self) -> usize {
        self.width + 1
    }

    pub fn as_slice(&self) -> &[T] {
        &self.angles
    }

    pub fn into_vec(self) -> Vec<T> {
        self.angles
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.angles[i * self.width..(i + 1) * self.width]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, T> {
        self.angles.chunks_exact(self.width)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_validation() {
        assert!(matches!(
            EmbeddingMatrix::<f32>::from_vec(1, 1, vec![1.0]),
            Err(Error::DimensionTooSmall { d: 1 })
        ));
        assert!(matches!(
            EmbeddingMatrix::<f32>::from_vec(2, 2, vec![1.0; 3]),
            Err(Error::LengthMismatch {
                expected: 4,
                actual: 3
            })
        ));
        let m = EmbeddingMatrix::<f64>::from_vec(2, 2, vec![1.0, 0.0, 0.0, 1.0]).unwrap();
        assert_eq!(m.row(1), &[0.0, 1.0]);
        assert_eq!(m.rows().count(), 2);
        assert!(m.slice_rows(1, 1).is_err());
        assert_eq!(m.slice_rows(1, 2).unwrap().as_slice(), &[0.0, 1.0]);
    }

    #[test]
    fn angle_matrix_dims() {
        let a = AngleMatrix::<f32>::from_vec(1, 3, vec![0.0; 3]).unwrap();
        assert_eq!(a.d(), 4);
        assert!(AngleMatrix::<f32>::from_vec(1, 0, vec![]).is_err());
    }
}
