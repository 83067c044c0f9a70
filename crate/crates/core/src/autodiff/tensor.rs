//! Dense row-major 2-D arrays of `f64`.
//!
//! Every differentiable quantity in the crate is a matrix: vectors are
//! `1 x n` rows or `n x 1` columns and scalars are `1 x 1`.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::AutodiffError;

/// Dimension sizes of a [`Tensor`], `[rows, cols]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Shape {
    pub rows: usize,
    pub cols: usize,
}

impl Shape {
    pub const SCALAR: Shape = Shape { rows: 1, cols: 1 };

    pub fn new(rows: usize, cols: usize) -> Self {
        Shape { rows, cols }
    }

    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_scalar(&self) -> bool {
        self.rows == 1 && self.cols == 1
    }

    pub fn dims(&self) -> [usize; 2] {
        [self.rows, self.cols]
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}]", self.rows, self.cols)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    shape: Shape,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self, AutodiffError> {
        if data.len() != rows * cols {
            return Err(AutodiffError::DataLength {
                shape: Shape::new(rows, cols),
                len: data.len(),
            });
        }
        Ok(Tensor {
            shape: Shape::new(rows, cols),
            data,
        })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn ones(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 1.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Tensor {
            shape: Shape::new(rows, cols),
            data: vec![value; rows * cols],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: Shape::SCALAR,
            data: vec![value],
        }
    }

    /// A `1 x n` row vector.
    pub fn row(values: &[f64]) -> Self {
        Tensor {
            shape: Shape::new(1, values.len()),
            data: values.to_vec(),
        }
    }

    /// A `n x 1` column vector.
    pub fn column(values: &[f64]) -> Self {
        Tensor {
            shape: Shape::new(values.len(), 1),
            data: values.to_vec(),
        }
    }

    /// Stacks equal-length rows into a matrix.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self, AutodiffError> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(AutodiffError::ShapeMismatch {
                    op: "from_rows",
                    left: Shape::new(1, cols),
                    right: Shape::new(1, r.len()),
                });
            }
            data.extend_from_slice(r);
        }
        Tensor::new(rows.len(), cols, data)
    }

    pub fn shape(&self) -> Shape {
        self.shape
    }

    pub fn rows(&self) -> usize {
        self.shape.rows
    }

    pub fn cols(&self) -> usize {
        self.shape.cols
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.shape.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.shape.cols + col] = value;
    }

    pub fn row_slice(&self, row: usize) -> &[f64] {
        let c = self.shape.cols;
        &self.data[row * c..(row + 1) * c]
    }

    /// Value of a `1 x 1` tensor.
    pub fn item(&self) -> Result<f64, AutodiffError> {
        if self.shape.is_scalar() {
            Ok(self.data[0])
        } else {
            Err(AutodiffError::NotScalar(self.shape))
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Tensor {
        Tensor {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(
        &self,
        other: &Tensor,
        op: &'static str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Result<Tensor, AutodiffError> {
        if self.shape != other.shape {
            return Err(AutodiffError::ShapeMismatch {
                op,
                left: self.shape,
                right: other.shape,
            });
        }
        Ok(Tensor {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn squared_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum()
    }

    pub fn transpose(&self) -> Tensor {
        let Shape { rows, cols } = self.shape;
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c in 0..cols {
                out[c * rows + r] = self.data[r * cols + c];
            }
        }
        Tensor {
            shape: Shape::new(cols, rows),
            data: out,
        }
    }

    /// `op(self) * op(other)` where `op` optionally transposes.
    pub fn matmul_t(
        &self,
        other: &Tensor,
        transpose_self: bool,
        transpose_other: bool,
    ) -> Result<Tensor, AutodiffError> {
        let (m, k) = if transpose_self {
            (self.cols(), self.rows())
        } else {
            (self.rows(), self.cols())
        };
        let (k2, n) = if transpose_other {
            (other.cols(), other.rows())
        } else {
            (other.rows(), other.cols())
        };
        if k != k2 {
            return Err(AutodiffError::ShapeMismatch {
                op: "matmul",
                left: self.shape,
                right: other.shape,
            });
        }
        let mut out = vec![0.0; m * n];
        if m > 0 && n > 0 && k > 0 {
            // Row-major strides; a transpose swaps them.
            let (rsa, csa) = if transpose_self {
                (1, self.cols() as isize)
            } else {
                (self.cols() as isize, 1)
            };
            let (rsb, csb) = if transpose_other {
                (1, other.cols() as isize)
            } else {
                (other.cols() as isize, 1)
            };
            // SAFETY: the pointers come from live slices whose lengths match
            // the dimensions and strides passed alongside them.
            unsafe {
                matrixmultiply::dgemm(
                    m,
                    k,
                    n,
                    1.0,
                    self.data.as_ptr(),
                    rsa,
                    csa,
                    other.data.as_ptr(),
                    rsb,
                    csb,
                    0.0,
                    out.as_mut_ptr(),
                    n as isize,
                    1,
                );
            }
        }
        Ok(Tensor {
            shape: Shape::new(m, n),
            data: out,
        })
    }

    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, AutodiffError> {
        self.matmul_t(other, false, false)
    }

    /// Columns `start..end` of every row.
    pub fn slice_cols(&self, start: usize, end: usize) -> Tensor {
        let width = end - start;
        let mut data = Vec::with_capacity(self.rows() * width);
        for r in 0..self.rows() {
            data.extend_from_slice(&self.row_slice(r)[start..end]);
        }
        Tensor {
            shape: Shape::new(self.rows(), width),
            data,
        }
    }

    pub fn concat_cols(parts: &[&Tensor]) -> Result<Tensor, AutodiffError> {
        let rows = parts.first().map_or(0, |p| p.rows());
        for p in parts {
            if p.rows() != rows {
                return Err(AutodiffError::ShapeMismatch {
                    op: "concat",
                    left: parts[0].shape,
                    right: p.shape,
                });
            }
        }
        let cols: usize = parts.iter().map(|p| p.cols()).sum();
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(p.row_slice(r));
            }
        }
        Ok(Tensor {
            shape: Shape::new(rows, cols),
            data,
        })
    }

    pub fn max_abs_diff(&self, other: &Tensor) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}
