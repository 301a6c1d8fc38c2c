//! Dense and sparse nonnegative matrix storage, plus the elementwise and
//! product kernels every update rule consumes.
//!
//! Dense data is row-major `ndarray::Array2<f64>`; sparse data is coordinate
//! triplets sorted by (row, col). All kernels iterate in a fixed order so
//! repeated runs are bitwise reproducible.

use std::borrow::Cow;

use ndarray::{Array1, Array2, Axis};

use crate::error::{Error, Result};

/// Dense row-major matrix, the working type for factors and intermediates.
pub type DenseMatrix = Array2<f64>;

/// Sparse coordinate storage: unique in-bounds triplets sorted by (row, col).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseCoo {
    rows: usize,
    cols: usize,
    triplets: Vec<(usize, usize, f64)>,
}

impl SparseCoo {
    pub fn new(rows: usize, cols: usize, mut triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        triplets.sort_by_key(|t| (t.0, t.1));
        for window in triplets.windows(2) {
            if (window[0].0, window[0].1) == (window[1].0, window[1].1) {
                return Err(Error::DuplicateSparseEntry {
                    row: window[0].0,
                    col: window[0].1,
                });
            }
        }
        for &(r, c, v) in &triplets {
            if r >= rows || c >= cols {
                return Err(Error::SparseEntryOutOfBounds {
                    row: r,
                    col: c,
                    rows,
                    cols,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        Ok(Self {
            rows,
            cols,
            triplets,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.triplets.len()
    }

    pub fn triplets(&self) -> &[(usize, usize, f64)] {
        &self.triplets
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros((self.rows, self.cols));
        for &(r, c, v) in &self.triplets {
            out[[r, c]] = v;
        }
        out
    }
}

/// Nonnegative input data matrix, dense or sparse-coordinate.
#[derive(Debug, Clone, PartialEq)]
pub enum DataMatrix {
    Dense(DenseMatrix),
    Sparse(SparseCoo),
}

impl DataMatrix {
    /// Wrap a dense matrix, validating that every entry is finite and >= 0.
    pub fn dense(values: DenseMatrix) -> Result<Self> {
        for ((r, c), &v) in values.indexed_iter() {
            if !v.is_finite() {
                return Err(Error::NonFiniteEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
            if v < 0.0 {
                return Err(Error::NegativeEntry {
                    row: r,
                    col: c,
                    value: v,
                });
            }
        }
        Ok(DataMatrix::Dense(values))
    }

    pub fn sparse(rows: usize, cols: usize, triplets: Vec<(usize, usize, f64)>) -> Result<Self> {
        Ok(DataMatrix::Sparse(SparseCoo::new(rows, cols, triplets)?))
    }

    pub fn rows(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.nrows(),
            DataMatrix::Sparse(s) => s.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            DataMatrix::Dense(m) => m.ncols(),
            DataMatrix::Sparse(s) => s.cols(),
        }
    }

    /// Borrow the dense form, materializing only for sparse storage.
    pub fn to_dense(&self) -> Cow<'_, DenseMatrix> {
        match self {
            DataMatrix::Dense(m) => Cow::Borrowed(m),
            DataMatrix::Sparse(s) => Cow::Owned(s.to_dense()),
        }
    }

    /// Product with a dense right factor. The sparse path skips zero entries
    /// and agrees with the densified product entrywise to relative 1e-14.
    pub fn matmul(&self, rhs: &DenseMatrix) -> Result<DenseMatrix> {
        match self {
            DataMatrix::Dense(m) => matmul(m, rhs),
            DataMatrix::Sparse(s) => {
                if s.cols() != rhs.nrows() {
                    return Err(shape_mismatch(
                        "matmul",
                        (s.rows(), s.cols()),
                        (rhs.nrows(), rhs.ncols()),
                    ));
                }
                let mut out = DenseMatrix::zeros((s.rows(), rhs.ncols()));
                for &(r, c, v) in s.triplets() {
                    for j in 0..rhs.ncols() {
                        out[[r, j]] += v * rhs[[c, j]];
                    }
                }
                Ok(out)
            }
        }
    }
}

fn shape_mismatch(op: &'static str, left: (usize, usize), right: (usize, usize)) -> Error {
    Error::ShapeMismatch {
        op,
        left_rows: left.0,
        left_cols: left.1,
        right_rows: right.0,
        right_cols: right.1,
    }
}

/// Matrix product with an explicit inner-dimension check.
pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.ncols() != b.nrows() {
        return Err(shape_mismatch("matmul", a.dim(), b.dim()));
    }
    Ok(a.dot(b))
}

/// Elementwise binary operations over equal-shape matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EwOp {
    Mul,
    Div,
    Add,
    Sub,
}

/// Elementwise combine. Division requires a nonzero divisor; use
/// [`ew_div_locked`] where the multiplicative-update 0/0 convention applies.
pub fn ew_combine(a: &DenseMatrix, b: &DenseMatrix, op: EwOp) -> Result<DenseMatrix> {
    if a.dim() != b.dim() {
        return Err(shape_mismatch("ew_combine", a.dim(), b.dim()));
    }
    let mut out = a.clone();
    for ((r, c), x) in out.indexed_iter_mut() {
        let y = b[[r, c]];
        *x = match op {
            EwOp::Mul => *x * y,
            EwOp::Add => *x + y,
            EwOp::Sub => *x - y,
            EwOp::Div => {
                if y == 0.0 {
                    return Err(Error::DivisionByZero { row: r, col: c });
                }
                *x / y
            }
        };
    }
    Ok(out)
}

/// Elementwise division under the zero-locking convention: 0/0 evaluates to 0
/// (the numerator being zero means the corresponding factor entry is already
/// zero and stays zero). A nonzero numerator over a zero divisor is an error.
pub fn ew_div_locked(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.dim() != b.dim() {
        return Err(shape_mismatch("ew_div_locked", a.dim(), b.dim()));
    }
    let mut out = a.clone();
    for ((r, c), x) in out.indexed_iter_mut() {
        let y = b[[r, c]];
        if *x == 0.0 {
            *x = 0.0;
        } else if y == 0.0 {
            return Err(Error::DivisionByZero { row: r, col: c });
        } else {
            *x /= y;
        }
    }
    Ok(out)
}

/// Entrywise power with the conventions x^0 = 1 (including at x = 0) and
/// x^1 = x exactly. Zero raised to a negative power is an error.
pub fn ew_pow(a: &DenseMatrix, exponent: f64) -> Result<DenseMatrix> {
    let mut out = a.clone();
    for ((r, c), x) in out.indexed_iter_mut() {
        if *x == 0.0 && exponent < 0.0 {
            return Err(Error::ZeroToNegativePower {
                row: r,
                col: c,
                exponent,
            });
        }
        *x = pow_scalar(*x, exponent);
    }
    Ok(out)
}

/// Scalar power used by every kernel. Exponents 0, 1, -1 and 2 take exact
/// arithmetic paths; everything else goes through `powf`.
#[inline]
pub(crate) fn pow_scalar(x: f64, e: f64) -> f64 {
    if e == 0.0 {
        1.0
    } else if e == 1.0 {
        x
    } else if e == -1.0 {
        1.0 / x
    } else if e == 2.0 {
        x * x
    } else {
        x.powf(e)
    }
}

/// Column sums; for nonnegative W these are the column l1 norms.
pub fn col_sums(a: &DenseMatrix) -> Array1<f64> {
    a.sum_axis(Axis(0))
}

/// Row sums.
pub fn row_sums(a: &DenseMatrix) -> Array1<f64> {
    a.sum_axis(Axis(1))
}
