//! Differentiable building blocks with explicit forward and backward passes.

use crate::error::{Error, Result};
use crate::tensor::{add_bias_rows, matmul, Matrix, Real};

/// Weights of a fully connected layer, `y = x · weight + bias`.
///
/// `weight` is `in × out` so a batch of row vectors multiplies on the left.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearParams<T = f32> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearGrads<T = f32> {
    pub weight: Matrix<T>,
    pub bias: Vec<T>,
}

impl<T: Real> LinearParams<T> {
    pub fn new(weight: Matrix<T>, bias: Vec<T>) -> Result<Self> {
        if bias.len() != weight.cols() {
            return Err(Error::shape(
                "LinearParams::new",
                weight.shape_str(),
                format!("bias of length {}", bias.len()),
            ));
        }
        Ok(Self { weight, bias })
    }

    pub fn zeros(fan_in: usize, fan_out: usize) -> Self {
        Self {
            weight: Matrix::zeros(fan_in, fan_out),
            bias: vec![T::zero(); fan_out],
        }
    }

    pub fn fan_in(&self) -> usize {
        self.weight.rows()
    }

    pub fn fan_out(&self) -> usize {
        self.weight.cols()
    }

    pub fn param_count(&self) -> usize {
        self.weight.data().len() + self.bias.len()
    }
}

pub fn linear_forward<T: Real>(x: &Matrix<T>, p: &LinearParams<T>) -> Result<Matrix<T>> {
    if x.cols() != p.fan_in() {
        return Err(Error::shape(
            "linear_forward",
            x.shape_str(),
            p.weight.shape_str(),
        ));
    }
    add_bias_rows(&matmul(x, &p.weight, false, false)?, &p.bias)
}

/// Returns `(d_x, grads)` for upstream gradient `d_out`.
pub fn linear_backward<T: Real>(
    x: &Matrix<T>,
    p: &LinearParams<T>,
    d_out: &Matrix<T>,
) -> Result<(Matrix<T>, LinearGrads<T>)> {
    if x.cols() != p.fan_in() || d_out.cols() != p.fan_out() || x.rows() != d_out.rows() {
        return Err(Error::shape(
            "linear_backward",
            format!("x {} with weight {}", x.shape_str(), p.weight.shape_str()),
            format!("d_out {}", d_out.shape_str()),
        ));
    }
    let d_x = matmul(d_out, &p.weight, false, true)?;
    let d_weight = matmul(x, d_out, true, false)?;
    Ok((
        d_x,
        LinearGrads {
            weight: d_weight,
            bias: d_out.column_sums(),
        },
    ))
}

/// Logistic function, using the branch that never exponentiates a positive
/// number so it stays finite across the whole range.
#[inline]
pub fn sigmoid<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

#[inline]
pub fn swish_scalar<T: Real>(x: T) -> T {
    x * sigmoid(x)
}

#[inline]
pub fn swish_grad_scalar<T: Real>(x: T) -> T {
    let s = sigmoid(x);
    s + x * s * (T::one() - s)
}

/// `x · σ(x)` elementwise.
pub fn swish<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.map(swish_scalar)
}

/// Derivative of [`swish`] evaluated at `x`.
pub fn swish_grad<T: Real>(x: &Matrix<T>) -> Matrix<T> {
    x.map(swish_grad_scalar)
}

/// Backward through swish: `d_out ⊙ swish'(pre)`.
pub fn swish_backward<T: Real>(pre: &Matrix<T>, d_out: &Matrix<T>) -> Result<Matrix<T>> {
    if pre.shape() != d_out.shape() {
        return Err(Error::shape(
            "swish_backward",
            pre.shape_str(),
            d_out.shape_str(),
        ));
    }
    let mut out = d_out.clone();
    for (g, &z) in out.data_mut().iter_mut().zip(pre.data()) {
        *g *= swish_grad_scalar(z);
    }
    Ok(out)
}

/// Lookup table for categorical ids. Row 0 is reserved for ids that were not
/// seen when the vocabulary was built.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T = f32> {
    pub table: Matrix<T>,
}

impl<T: Real> EmbeddingTable<T> {
    pub fn new(table: Matrix<T>) -> Result<Self> {
        if table.rows() < 2 || table.cols() < 1 {
            return Err(Error::Config(format!(
                "embedding table needs at least 2 rows (row 0 is out-of-vocabulary) and 1 column, got {}",
                table.shape_str()
            )));
        }
        Ok(Self { table })
    }

    pub fn vocab_size(&self) -> usize {
        self.table.rows()
    }

    pub fn dim(&self) -> usize {
        self.table.cols()
    }

    /// One-hot width over embedding width, counting real ids only.
    pub fn compression_ratio(&self) -> f64 {
        (self.vocab_size() - 1) as f64 / self.dim() as f64
    }
}

pub fn embedding_lookup<T: Real>(ids: &[usize], t: &EmbeddingTable<T>) -> Result<Matrix<T>> {
    let v = t.vocab_size();
    if let Some(&bad) = ids.iter().find(|&&id| id >= v) {
        return Err(Error::Index {
            index: bad,
            bound: v,
        });
    }
    Ok(t.table.select_rows(ids))
}

/// Scatter-add of `d_out` rows into a `vocab_size × d` gradient.
pub fn embedding_backward<T: Real>(
    ids: &[usize],
    d_out: &Matrix<T>,
    vocab_size: usize,
) -> Result<Matrix<T>> {
    if ids.len() != d_out.rows() {
        return Err(Error::shape(
            "embedding_backward",
            format!("{} ids", ids.len()),
            d_out.shape_str(),
        ));
    }
    let d = d_out.cols();
    let mut grad = Matrix::zeros(vocab_size, d);
    for (r, &id) in ids.iter().enumerate() {
        if id >= vocab_size {
            return Err(Error::Index {
                index: id,
                bound: vocab_size,
            });
        }
        let dst = &mut grad.data_mut()[id * d..(id + 1) * d];
        for (g, &u) in dst.iter_mut().zip(d_out.row(r)) {
            *g += u;
        }
    }
    Ok(grad)
}

pub fn concat_cols<T: Real>(a: &Matrix<T>, b: &Matrix<T>) -> Result<Matrix<T>> {
    if a.rows() != b.rows() {
        return Err(Error::shape("concat_cols", a.shape_str(), b.shape_str()));
    }
    let cols = a.cols() + b.cols();
    let mut data = Vec::with_capacity(a.rows() * cols);
    for r in 0..a.rows() {
        data.extend_from_slice(a.row(r));
        data.extend_from_slice(b.row(r));
    }
    Matrix::from_vec(a.rows(), cols, data)
}

/// Splits `x` into its first `left_cols` columns and the rest.
pub fn split_cols<T: Real>(x: &Matrix<T>, left_cols: usize) -> Result<(Matrix<T>, Matrix<T>)> {
    if left_cols > x.cols() {
        return Err(Error::shape(
            "split_cols",
            x.shape_str(),
            format!("split at column {left_cols}"),
        ));
    }
    let right_cols = x.cols() - left_cols;
    let mut left = Vec::with_capacity(x.rows() * left_cols);
    let mut right = Vec::with_capacity(x.rows() * right_cols);
    for r in 0..x.rows() {
        let row = x.row(r);
        left.extend_from_slice(&row[..left_cols]);
        right.extend_from_slice(&row[left_cols..]);
    }
    Ok((
        Matrix::from_vec(x.rows(), left_cols, left)?,
        Matrix::from_vec(x.rows(), right_cols, right)?,
    ))
}

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse<T: Real>(pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
    if pred.len() != target.len() {
        return Err(Error::shape(
            "mse",
            format!("{} predictions", pred.len()),
            format!("{} targets", target.len()),
        ));
    }
    if pred.is_empty() {
        return Err(Error::Argument("mse needs at least one value".into()));
    }
    let n = T::from_f64(pred.len() as f64);
    let two = T::from_f64(2.0);
    let mut loss = T::zero();
    let mut grad = Vec::with_capacity(pred.len());
    for (&p, &t) in pred.iter().zip(target) {
        let diff = p - t;
        loss += diff * diff;
        grad.push(two * diff / n);
    }
    Ok((loss / n, grad))
}

/// Training objective. Only MSE is provided; the enum keeps the choice in
/// one place.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Loss {
    #[default]
    Mse,
}

impl Loss {
    pub fn evaluate<T: Real>(self, pred: &[T], target: &[T]) -> Result<(T, Vec<T>)> {
        match self {
            Loss::Mse => mse(pred, target),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Loss::Mse => "mse",
        }
    }
}
