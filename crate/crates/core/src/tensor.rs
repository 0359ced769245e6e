//! Dense row-major matrices and the kernels the network is built from.
//!
//! Every kernel here has a fixed summation order. In [`matmul`] each output
//! element `c[i][j]` accumulates `a[i][k] * b[k][j]` for `k = 0, 1, ..., K-1`
//! starting from zero, which makes the result bitwise identical to the naive
//! triple loop. Large products are split across threads by output row; rows
//! are independent so threading never changes the result.

use std::fmt;

use num_traits::{Float, NumAssign};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Scalar type usable in a [`Matrix`]. Implemented for `f32` (training) and
/// `f64` (gradient checks and oracles).
pub trait Real:
    Float + NumAssign + Default + Send + Sync + fmt::Debug + fmt::Display + 'static
{
    fn from_f64(x: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Real for f32 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Real for f64 {
    #[inline]
    fn from_f64(x: f64) -> Self {
        x
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}

/// Products with at least this many multiply-adds are split across threads.
const PARALLEL_MIN_WORK: usize = 1 << 16;

#[derive(Clone, PartialEq)]
pub struct Matrix<T = f32> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: fmt::Debug> fmt::Debug for Matrix<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Matrix {}x{} ", self.rows, self.cols)?;
        f.debug_list()
            .entries(self.data.chunks(self.cols.max(1)))
            .finish()
    }
}

impl<T: Real> Matrix<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![T::zero(); rows * cols],
        }
    }

    pub fn filled(rows: usize, cols: usize, value: T) -> Self {
        Self {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = T::one();
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::shape(
                "Matrix::from_vec",
                format!("{rows}x{cols}"),
                format!("{} values", data.len()),
            ));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from nested rows. All rows must have the same length.
    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != cols {
                return Err(Error::shape(
                    "Matrix::from_rows",
                    format!("row 0 has {cols} columns"),
                    format!("row {i} has {}", r.len()),
                ));
            }
            data.extend_from_slice(r);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn shape_str(&self) -> String {
        format!("{}x{}", self.rows, self.cols)
    }

    #[inline]
    pub fn data(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: T) {
        self.data[r * self.cols + c] = v;
    }

    #[inline]
    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    /// Elementwise product. Shapes must match.
    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::shape(
                "hadamard",
                self.shape_str(),
                other.shape_str(),
            ));
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a * b)
                .collect(),
        })
    }

    /// Sum of each column, accumulated top to bottom.
    pub fn column_sums(&self) -> Vec<T> {
        let mut sums = vec![T::zero(); self.cols];
        for r in 0..self.rows {
            for (s, &x) in sums.iter_mut().zip(self.row(r)) {
                *s += x;
            }
        }
        sums
    }

    /// Picks the given rows, in order, into a new matrix.
    pub fn select_rows(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.cols);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Self {
            rows: indices.len(),
            cols: self.cols,
            data,
        }
    }

    /// Keeps the given columns, in order.
    pub fn select_cols(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.rows);
        for r in 0..self.rows {
            let row = self.row(r);
            data.extend(indices.iter().map(|&c| row[c]));
        }
        Self {
            rows: self.rows,
            cols: indices.len(),
            data,
        }
    }

    pub fn cast<U: Real>(&self) -> Matrix<U> {
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| U::from_f64(x.to_f64())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

/// Matrix product `op(a) * op(b)` where `op` optionally transposes.
///
/// Accumulation is in `T` with `k` ascending for every output element.
pub fn matmul<T: Real>(
    a: &Matrix<T>,
    b: &Matrix<T>,
    transpose_a: bool,
    transpose_b: bool,
) -> Result<Matrix<T>> {
    let (m, ka) = if transpose_a {
        (a.cols, a.rows)
    } else {
        (a.rows, a.cols)
    };
    let (kb, n) = if transpose_b {
        (b.cols, b.rows)
    } else {
        (b.rows, b.cols)
    };
    if ka != kb {
        return Err(Error::shape(
            "matmul",
            format!("{}{}", a.shape_str(), if transpose_a { "ᵀ" } else { "" }),
            format!("{}{}", b.shape_str(), if transpose_b { "ᵀ" } else { "" }),
        ));
    }
    let k = ka;

    let a_owned;
    let a = if transpose_a {
        a_owned = a.transpose();
        &a_owned
    } else {
        a
    };
    let b_owned;
    let b = if transpose_b {
        b_owned = b.transpose();
        &b_owned
    } else {
        b
    };

    let mut out = Matrix::zeros(m, n);
    if m == 0 || n == 0 {
        return Ok(out);
    }
    let row_kernel = |i: usize, out_row: &mut [T]| {
        let a_row = &a.data[i * k..(i + 1) * k];
        for (kk, &a_ik) in a_row.iter().enumerate() {
            let b_row = &b.data[kk * n..(kk + 1) * n];
            for (c, &b_kj) in out_row.iter_mut().zip(b_row) {
                *c += a_ik * b_kj;
            }
        }
    };
    if m * n * k >= PARALLEL_MIN_WORK && m > 1 {
        out.data
            .par_chunks_mut(n)
            .enumerate()
            .for_each(|(i, out_row)| row_kernel(i, out_row));
    } else {
        out.data
            .chunks_mut(n)
            .enumerate()
            .for_each(|(i, out_row)| row_kernel(i, out_row));
    }
    Ok(out)
}

/// Adds `bias` to every row of `x`.
pub fn add_bias_rows<T: Real>(x: &Matrix<T>, bias: &[T]) -> Result<Matrix<T>> {
    if bias.len() != x.cols {
        return Err(Error::shape(
            "add_bias_rows",
            x.shape_str(),
            format!("bias of length {}", bias.len()),
        ));
    }
    let mut out = x.clone();
    if x.cols > 0 {
        for row in out.data.chunks_mut(x.cols) {
            for (v, &b) in row.iter_mut().zip(bias) {
                *v += b;
            }
        }
    }
    Ok(out)
}
