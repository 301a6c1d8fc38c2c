//! One block-update step of the log-regularized algorithms: MM updates for
//! both factors and the heuristic variant. Unlike the l1 case the roles of
//! the two factors are not exchangeable; the dictionary update carries a
//! per-column penalty sum over the activations.

use ndarray::Array1;

use crate::error::Result;
use crate::matrix::{col_sums, row_sums, DataMatrix, DenseMatrix};
use crate::updates_l1::{compute_ratio_parts, gamma_exponent, heur_update_w, ratio_step};

/// MM update of H under log regularization:
/// h <- h * (p / (q + alpha / (h + epsilon / ||w_k||_1)))^gamma(beta).
/// The column norms of the incoming W play the role of the broadcast matrix
/// Upsilon; they are kept as a K-vector, never materialized at K x N.
pub fn mm_log_update_h(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    alpha: f64,
    epsilon: f64,
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
            continue; // frozen row
        }
        for n in 0..h.ncols() {
            let den = q[[k, n]] + alpha / (h[[k, n]] + epsilon / lambda[k]);
            out[[k, n]] = ratio_step(h[[k, n]], p[[k, n]], den, gamma, k, n)?;
        }
    }
    Ok(out)
}

/// MM update of W under log regularization:
/// w_fk <- w_fk * ([SH']_fk / ([TH']_fk + c_k))^gamma(beta) with
/// c_k = sum_n alpha / (||w_k||_1 + epsilon / h_kn), constant down column k.
/// Entries with h_kn = 0 contribute nothing to c_k (the limit of the
/// summand as h_kn -> 0).
pub fn mm_log_update_w(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    alpha: f64,
    epsilon: f64,
    kappa: f64,
) -> Result<DenseMatrix> {
    let parts = compute_ratio_parts(v, w, h, beta, kappa)?;
    let p = parts.s.dot(&h.t());
    let q = parts.t.dot(&h.t());
    let lambda = col_sums(w);
    let rho = row_sums(h);
    let gamma = gamma_exponent(beta);
    let mut penalty = Array1::<f64>::zeros(w.ncols());
    for k in 0..w.ncols() {
        for n in 0..h.ncols() {
            let hv = h[[k, n]];
            if hv > 0.0 {
                penalty[k] += alpha / (lambda[k] + epsilon / hv);
            }
        }
    }
    let mut out = w.clone();
    for k in 0..w.ncols() {
        if rho[k] == 0.0 {
            continue; // frozen column, matches the unregularized rule
        }
        for f in 0..w.nrows() {
            let den = q[[f, k]] + penalty[k];
            out[[f, k]] = ratio_step(w[[f, k]], p[[f, k]], den, gamma, f, k)?;
        }
    }
    Ok(out)
}

/// Heuristic update of H under log regularization, for a column-normalized
/// dictionary: h <- h * p / (q + alpha / (h + epsilon)).
pub fn heur_log_update_h(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    alpha: f64,
    epsilon: f64,
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
            let den = q[[k, n]] + alpha / (h[[k, n]] + epsilon);
            out[[k, n]] = ratio_step(h[[k, n]], p[[k, n]], den, 1.0, k, n)?;
        }
    }
    Ok(out)
}

/// Heuristic update of W under log regularization. The regularizer does not
/// touch the dictionary in the reparametrized problem, so this is the same
/// rule as the l1 case.
pub fn heur_log_update_w(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    beta: f64,
    kappa: f64,
) -> Result<DenseMatrix> {
    heur_update_w(v, w, h, beta, kappa)
}
