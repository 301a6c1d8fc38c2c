//! One block-update step of each l1-regularized algorithm family:
//! majorization-minimization, the gradient-split heuristic, and the
//! Lagrangian scheme with per-column multiplier search.
//!
//! All families share the same building blocks: the ratio parts
//! S = (V + kappa) (WH + kappa)^(beta - 2) and T = (WH + kappa)^(beta - 1),
//! and entrywise updates of the form x <- x * (num / den)^gamma with zeros
//! locked in place.

use ndarray::Array1;

use crate::error::{Error, Result};
use crate::matrix::{col_sums, matmul, pow_scalar, row_sums, DataMatrix, DenseMatrix};

/// Newton-Raphson tolerance on |phi(nu) - 1| for the multiplier search.
pub const MULTIPLIER_TOL: f64 = 1e-10;
/// Subiteration cap for the multiplier search.
pub const MULTIPLIER_MAX_SUB: usize = 200;

/// The two matrices every multiplicative rule is assembled from.
#[derive(Debug, Clone)]
pub struct RatioParts {
    /// S = (V + kappa) (WH + kappa)^(beta - 2), F x N.
    pub s: DenseMatrix,
    /// T = (WH + kappa)^(beta - 1), F x N.
    pub t: DenseMatrix,
}

/// Build S and T from the kappa-shifted product. Requires WH + kappa > 0
/// entrywise whenever a negative power is taken (beta < 2).
pub fn compute_ratio_parts(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    kappa: f64,
) -> Result<RatioParts> {
    let wh = matmul(w, h)?;
    if v.rows() != wh.nrows() || v.cols() != wh.ncols() {
        return Err(Error::ShapeMismatch {
            op: "compute_ratio_parts",
            left_rows: v.rows(),
            left_cols: v.cols(),
            right_rows: wh.nrows(),
            right_cols: wh.ncols(),
        });
    }
    let vd = v.to_dense();
    let mut s = DenseMatrix::zeros(wh.dim());
    let mut t = DenseMatrix::zeros(wh.dim());
    let (e_s, e_t) = (beta - 2.0, beta - 1.0);
    for ((f, n), &y0) in wh.indexed_iter() {
        let y = y0 + kappa;
        if y == 0.0 && e_s < 0.0 {
            return Err(Error::ZeroToNegativePower {
                row: f,
                col: n,
                exponent: e_s,
            });
        }
        s[[f, n]] = (vd[[f, n]] + kappa) * pow_scalar(y, e_s);
        t[[f, n]] = pow_scalar(y, e_t);
    }
    Ok(RatioParts { s, t })
}

/// Exponent applied to the update ratio; piecewise in beta.
pub fn gamma_exponent(beta: f64) -> f64 {
    if beta < 1.0 {
        1.0 / (2.0 - beta)
    } else if beta <= 2.0 {
        1.0
    } else {
        1.0 / (beta - 1.0)
    }
}

/// One multiplicative step for a single entry: old * (num / den)^gamma.
/// A zero numerator locks the entry at zero (0/0 included); a nonzero
/// numerator over a zero denominator is an error.
#[inline]
pub(crate) fn ratio_step(
    old: f64,
    num: f64,
    den: f64,
    gamma: f64,
    row: usize,
    col: usize,
) -> Result<f64> {
    if old == 0.0 || num == 0.0 {
        return Ok(0.0);
    }
    if den == 0.0 {
        return Err(Error::DivisionByZero { row, col });
    }
    let ratio = num / den;
    let stepped = if gamma == 1.0 { ratio } else { ratio.powf(gamma) };
    let out = old * stepped;
    if !out.is_finite() {
        return Err(Error::NonFiniteEntry {
            row,
            col,
            value: out,
        });
    }
    Ok(out)
}

/// MM update of H: H * (W'S / (W'T + alpha ||w_k||_1))^gamma(beta).
/// Rows of H facing an all-zero dictionary column are left frozen.
pub fn mm_update_h(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    alpha: f64,
    kappa: f64,
) -> Result<DenseMatrix> {
    let parts = compute_ratio_parts(v, w, h, beta, kappa)?;
    let p = w.t().dot(&parts.s);
    let q = w.t().dot(&parts.t);
    let lambda = col_sums(w);
    let gamma = gamma_exponent(beta);
    let mut out = h.clone();
    for k in 0..h.nrows() {
        if lambda[k] == 0.0 {
            continue; // frozen row, see solver for the one-time warning
        }
        for n in 0..h.ncols() {
            let den = q[[k, n]] + alpha * lambda[k];
            out[[k, n]] = ratio_step(h[[k, n]], p[[k, n]], den, gamma, k, n)?;
        }
    }
    Ok(out)
}

/// MM update of W: W * (SH' / (TH' + alpha ||h_k||_1))^gamma(beta).
/// Columns of W facing an all-zero activation row are left frozen.
pub fn mm_update_w(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    alpha: f64,
    kappa: f64,
) -> Result<DenseMatrix> {
    let parts = compute_ratio_parts(v, w, h, beta, kappa)?;
    let p = parts.s.dot(&h.t());
    let q = parts.t.dot(&h.t());
    let rho = row_sums(h);
    let gamma = gamma_exponent(beta);
    let mut out = w.clone();
    for k in 0..w.ncols() {
        if rho[k] == 0.0 {
            continue;
        }
        for f in 0..w.nrows() {
            let den = q[[f, k]] + alpha * rho[k];
            out[[f, k]] = ratio_step(w[[f, k]], p[[f, k]], den, gamma, f, k)?;
        }
    }
    Ok(out)
}

/// Heuristic update of H: H * W'S / (W'T + alpha), no exponent.
/// Assumes the dictionary columns are l1-normalized.
pub fn heur_update_h(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    alpha: f64,
    kappa: f64,
) -> Result<DenseMatrix> {
    let parts = compute_ratio_parts(v, w, h, beta, kappa)?;
    let p = w.t().dot(&parts.s);
    let q = w.t().dot(&parts.t);
    let lambda = col_sums(w);
    let mut out = h.clone();
    for k in 0..h.nrows() {
        if lambda[k] == 0.0 {
            continue;
        }
        for n in 0..h.ncols() {
            out[[k, n]] = ratio_step(h[[k, n]], p[[k, n]], q[[k, n]] + alpha, 1.0, k, n)?;
        }
    }
    Ok(out)
}

/// Heuristic update of W from the gradient split of the reparametrized
/// objective, followed by l1 renormalization of the columns. The rank-one
/// correction terms are realized through per-column sums, never through
/// materialized all-ones matrices.
pub fn heur_update_w(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    kappa: f64,
) -> Result<DenseMatrix> {
    let parts = compute_ratio_parts(v, w, h, beta, kappa)?;
    let sh = parts.s.dot(&h.t());
    let th = parts.t.dot(&h.t());
    // c_t[k] = sum_f w_fk [TH']_fk, c_s[k] = sum_f w_fk [SH']_fk
    let mut c_t = Array1::<f64>::zeros(w.ncols());
    let mut c_s = Array1::<f64>::zeros(w.ncols());
    for f in 0..w.nrows() {
        for k in 0..w.ncols() {
            c_t[k] += w[[f, k]] * th[[f, k]];
            c_s[k] += w[[f, k]] * sh[[f, k]];
        }
    }
    let mut out = w.clone();
    for k in 0..w.ncols() {
        for f in 0..w.nrows() {
            let num = sh[[f, k]] + c_t[k];
            let den = th[[f, k]] + c_s[k];
            out[[f, k]] = ratio_step(w[[f, k]], num, den, 1.0, f, k)?;
        }
    }
    // renormalize columns to unit l1 norm
    let norms = col_sums(&out);
    for k in 0..out.ncols() {
        if norms[k] == 0.0 {
            return Err(Error::DegenerateColumn {
                index: k,
                factor: "W",
                reason: "all-zero column after heuristic update, cannot renormalize",
            });
        }
        out.column_mut(k).mapv_inplace(|x| x / norms[k]);
    }
    Ok(out)
}

/// Lagrangian update of H, only defined for beta <= 1:
/// H * (W'S / (W'T + alpha))^(1/(2-beta)).
pub fn lagr_update_h(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    alpha: f64,
    kappa: f64,
) -> Result<DenseMatrix> {
    check_lagrangian_beta(beta)?;
    let parts = compute_ratio_parts(v, w, h, beta, kappa)?;
    let p = w.t().dot(&parts.s);
    let q = w.t().dot(&parts.t);
    let lambda = col_sums(w);
    let gamma = 1.0 / (2.0 - beta);
    let mut out = h.clone();
    for k in 0..h.nrows() {
        if lambda[k] == 0.0 {
            continue;
        }
        for n in 0..h.ncols() {
            out[[k, n]] = ratio_step(h[[k, n]], p[[k, n]], q[[k, n]] + alpha, gamma, k, n)?;
        }
    }
    Ok(out)
}

pub(crate) fn check_lagrangian_beta(beta: f64) -> Result<()> {
    if beta > 1.0 {
        return Err(Error::UnsupportedConfig {
            reason: format!(
                "the Lagrangian updates are only available for beta <= 1 (got beta = {beta})"
            ),
        });
    }
    Ok(())
}

/// Find the multiplier nu such that the updated column sums to one:
/// phi(nu) = sum_f w_f (a_f / (b_f - nu))^(1/(2-beta)) = 1, with nu strictly
/// below min b_f over the support so every denominator stays positive.
///
/// Safeguarded Newton-Raphson: a bracket [lo, hi] with phi(lo) < 1 < phi(hi)
/// is maintained and any Newton step leaving it falls back to bisection.
pub fn solve_multiplier(
    numer_col: &[f64],
    denom_col: &[f64],
    w_col: &[f64],
    beta: f64,
    tol: f64,
    max_sub: usize,
    col: usize,
) -> Result<f64> {
    check_lagrangian_beta(beta)?;
    let gamma = 1.0 / (2.0 - beta);
    let support: Vec<usize> = (0..w_col.len())
        .filter(|&f| w_col[f] > 0.0 && numer_col[f] > 0.0)
        .collect();
    if support.is_empty() {
        return Err(Error::MultiplierSolve {
            column: col,
            reason: "empty support: no entry with w_fk > 0 and a positive numerator".into(),
        });
    }
    let ub = support
        .iter()
        .map(|&f| denom_col[f])
        .fold(f64::INFINITY, f64::min);
    let phi = |nu: f64| -> f64 {
        support
            .iter()
            .map(|&f| w_col[f] * (numer_col[f] / (denom_col[f] - nu)).powf(gamma))
            .sum()
    };
    let dphi = |nu: f64| -> f64 {
        support
            .iter()
            .map(|&f| {
                let d = denom_col[f] - nu;
                w_col[f] * (numer_col[f] / d).powf(gamma) * gamma / d
            })
            .sum()
    };

    if ub > 0.0 && (phi(0.0) - 1.0).abs() <= tol {
        return Ok(0.0);
    }

    // upper bracket end: walk toward ub until phi exceeds 1
    let mut hi = ub - 1e-12 * ub.abs().max(1.0);
    let mut guard = 0;
    while phi(hi) < 1.0 {
        hi = ub - 0.5 * (ub - hi);
        guard += 1;
        if guard > 200 || hi >= ub {
            return Err(Error::MultiplierSolve {
                column: col,
                reason: "could not bracket the root below the positivity bound".into(),
            });
        }
    }
    // lower bracket end: expand downward until phi drops below 1
    let mut lo = hi.min(0.0);
    let mut step = ub.abs().max(1.0);
    guard = 0;
    while phi(lo) >= 1.0 {
        lo -= step;
        step *= 2.0;
        guard += 1;
        if guard > 200 {
            return Err(Error::MultiplierSolve {
                column: col,
                reason: "no sign change: phi stays above 1 arbitrarily far below the bound".into(),
            });
        }
    }

    let mut nu = 0.5 * (lo + hi);
    for _ in 0..max_sub {
        let f = phi(nu) - 1.0;
        if f.abs() <= tol {
            return Ok(nu);
        }
        if f > 0.0 {
            hi = nu;
        } else {
            lo = nu;
        }
        let d = dphi(nu);
        let newton = nu - f / d;
        nu = if newton.is_finite() && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    Err(Error::MultiplierSolve {
        column: col,
        reason: format!("|phi - 1| did not reach {tol} within {max_sub} subiterations"),
    })
}

/// Lagrangian update of W: per-column multiplier search, then
/// W * (SH' / (TH' - nu_k))^(1/(2-beta)). Output columns sum to one within
/// the multiplier tolerance.
pub fn lagr_update_w(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    kappa: f64,
    tol: f64,
) -> Result<DenseMatrix> {
    check_lagrangian_beta(beta)?;
    let parts = compute_ratio_parts(v, w, h, beta, kappa)?;
    let sh = parts.s.dot(&h.t());
    let th = parts.t.dot(&h.t());
    let gamma = 1.0 / (2.0 - beta);
    let mut out = w.clone();
    for k in 0..w.ncols() {
        let a: Vec<f64> = sh.column(k).to_vec();
        let b: Vec<f64> = th.column(k).to_vec();
        let wk: Vec<f64> = w.column(k).to_vec();
        let nu = solve_multiplier(&a, &b, &wk, beta, tol, MULTIPLIER_MAX_SUB, k)?;
        for f in 0..w.nrows() {
            out[[f, k]] = ratio_step(wk[f], a[f], b[f] - nu, gamma, f, k)?;
        }
    }
    Ok(out)
}
