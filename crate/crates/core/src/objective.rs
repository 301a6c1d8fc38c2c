//! The beta-divergence in all its branches and the objective functions being
//! minimized: data fit plus a scaled l1 or log penalty on the activations.
//!
//! Both penalties are written in their scale-invariant form, weighting each
//! activation by the l1 norm of the matching dictionary column. At feasible
//! points (unit-norm columns) they reduce to the plain constrained penalties,
//! so one objective serves every method when reporting.

use crate::error::{Error, Result};
use crate::matrix::{col_sums, matmul, row_sums, DataMatrix, DenseMatrix};

/// Sparsity penalty placed on the activation matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularizer {
    L1 { alpha: f64 },
    Log { alpha: f64, epsilon: f64 },
}

impl Regularizer {
    pub fn alpha(&self) -> f64 {
        match self {
            Regularizer::L1 { alpha } => *alpha,
            Regularizer::Log { alpha, .. } => *alpha,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Regularizer::L1 { .. } => "l1",
            Regularizer::Log { .. } => "log",
        }
    }
}

/// The scalar beta-divergence d_beta(x | y).
///
/// Branch selection at beta = 0 and beta = 1 is exact equality on the value.
/// Tiny negative results from floating-point cancellation near x = y are
/// clamped to zero; the true value is nonnegative.
pub fn beta_div_scalar(x: f64, y: f64, beta: f64) -> Result<f64> {
    let val = if beta == 1.0 {
        if x <= 0.0 || y <= 0.0 {
            return Err(Error::BetaDomain {
                branch: "beta = 1",
                x,
                y,
            });
        }
        x * (x / y).ln() - x + y
    } else if beta == 0.0 {
        if x <= 0.0 || y <= 0.0 {
            return Err(Error::BetaDomain {
                branch: "beta = 0",
                x,
                y,
            });
        }
        let r = x / y;
        r - r.ln() - 1.0
    } else {
        if y <= 0.0 || (x <= 0.0 && beta < 1.0) || x < 0.0 {
            return Err(Error::BetaDomain {
                branch: "generic",
                x,
                y,
            });
        }
        x.powf(beta) / (beta * (beta - 1.0)) + y.powf(beta) / beta
            - x * y.powf(beta - 1.0) / (beta - 1.0)
    };
    Ok(val.max(0.0))
}

/// Kappa-stabilized data-fitting term D_beta(V + kappa | WH + kappa).
pub fn data_fit(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    kappa: f64,
) -> Result<f64> {
    let wh = matmul(w, h)?;
    if v.rows() != wh.nrows() || v.cols() != wh.ncols() {
        return Err(Error::ShapeMismatch {
            op: "data_fit",
            left_rows: v.rows(),
            left_cols: v.cols(),
            right_rows: wh.nrows(),
            right_cols: wh.ncols(),
        });
    }
    let vd = v.to_dense();
    let mut total = 0.0;
    for ((f, n), &y) in wh.indexed_iter() {
        let x = vd[[f, n]];
        total += beta_div_scalar(x + kappa, y + kappa, beta).map_err(|e| e.at_entry(f, n))?;
    }
    Ok(total)
}

fn check_factor_shapes(w: &DenseMatrix, h: &DenseMatrix) -> Result<()> {
    if w.ncols() != h.nrows() {
        return Err(Error::ShapeMismatch {
            op: "penalty",
            left_rows: w.nrows(),
            left_cols: w.ncols(),
            right_rows: h.nrows(),
            right_cols: h.ncols(),
        });
    }
    Ok(())
}

/// Scale-invariant l1 penalty: sum over (k, n) of ||w_k||_1 * h_kn.
pub fn penalty_l1_scaled(w: &DenseMatrix, h: &DenseMatrix) -> Result<f64> {
    check_factor_shapes(w, h)?;
    let lambda = col_sums(w);
    let h_rows = row_sums(h);
    Ok(lambda.dot(&h_rows))
}

/// Scale-invariant log penalty: sum over (k, n) of log(||w_k||_1 * h_kn + epsilon).
pub fn penalty_log_scaled(w: &DenseMatrix, h: &DenseMatrix, epsilon: f64) -> Result<f64> {
    check_factor_shapes(w, h)?;
    let lambda = col_sums(w);
    let mut total = 0.0;
    for (k, row) in h.outer_iter().enumerate() {
        for &hv in row.iter() {
            total += (lambda[k] * hv + epsilon).ln();
        }
    }
    Ok(total)
}

/// Full objective: kappa-stabilized data fit plus the scaled penalty.
pub fn objective(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    reg: &Regularizer,
    kappa: f64,
) -> Result<f64> {
    let fit = data_fit(v, w, h, beta, kappa)?;
    let pen = match reg {
        Regularizer::L1 { alpha } => alpha * penalty_l1_scaled(w, h)?,
        Regularizer::Log { alpha, epsilon } => alpha * penalty_log_scaled(w, h, *epsilon)?,
    };
    Ok(fit + pen)
}
