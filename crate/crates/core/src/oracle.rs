//! Independent materialization of the auxiliary functions behind every
//! multiplicative rule, used as a test oracle against the closed-form
//! updates.
//!
//! The auxiliary upper bound of the restricted objective is separable per
//! entry. Its data-fit part depends on the regime of beta (four branches),
//! its penalty part is either linear (beta <= 1) or a monomial bound
//! (beta > 1), with an anchor-derived slope that already includes alpha.
//! Everything here is difference-based: values are only meaningful relative
//! to the anchor, where the bound touches the objective.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::{col_sums, pow_scalar, row_sums, DenseMatrix};
use crate::objective::{beta_div_scalar, Regularizer};

/// Which factor the restricted objective varies over.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FactorSide {
    /// Variable is the activation matrix H; the dictionary W is fixed.
    Activations,
    /// Variable is the dictionary W; the activation matrix H is fixed.
    Dictionary,
}

/// Anchor data for evaluating the auxiliary bound of one block subproblem.
///
/// `p` and `q` hold the anchor products (W'S and W'T, or their dictionary-side
/// mirrors), and `pen_slope` the anchor-derived penalty slope including alpha.
/// Given these, both the bound and its gradient depend on the variable matrix
/// only through the entrywise ratios against the anchor.
#[derive(Debug, Clone)]
pub struct AuxContext {
    pub side: FactorSide,
    pub beta: f64,
    pub kappa: f64,
    pub reg: Regularizer,
    pub v: DenseMatrix,
    /// The factor held fixed: W on the activation side, H on the dictionary side.
    pub fixed: DenseMatrix,
    /// Strictly positive anchor for the variable factor.
    pub anchor: DenseMatrix,
    pub p: DenseMatrix,
    pub q: DenseMatrix,
    pub pen_slope: DenseMatrix,
}

impl AuxContext {
    /// Build the context at an anchor, computing the anchor products and the
    /// penalty slope from scratch.
    pub fn new(
        side: FactorSide,
        v: &DenseMatrix,
        fixed: &DenseMatrix,
        anchor: &DenseMatrix,
        beta: f64,
        reg: Regularizer,
        kappa: f64,
    ) -> Result<Self> {
        for ((r, c), &x) in anchor.indexed_iter() {
            if x.is_nan() || x <= 0.0 {
                return Err(Error::UnsupportedConfig {
                    reason: format!(
                        "auxiliary anchor must be strictly positive, got {x} at ({r}, {c})"
                    ),
                });
            }
        }
        let product = match side {
            FactorSide::Activations => fixed.dot(anchor),
            FactorSide::Dictionary => anchor.dot(fixed),
        };
        if product.dim() != v.dim() {
            return Err(Error::ShapeMismatch {
                op: "AuxContext::new",
                left_rows: v.nrows(),
                left_cols: v.ncols(),
                right_rows: product.nrows(),
                right_cols: product.ncols(),
            });
        }
        let mut s = DenseMatrix::zeros(v.dim());
        let mut t = DenseMatrix::zeros(v.dim());
        for ((f, n), &y0) in product.indexed_iter() {
            let y = y0 + kappa;
            if y == 0.0 && beta < 2.0 {
                return Err(Error::ZeroToNegativePower {
                    row: f,
                    col: n,
                    exponent: beta - 2.0,
                });
            }
            s[[f, n]] = (v[[f, n]] + kappa) * pow_scalar(y, beta - 2.0);
            t[[f, n]] = pow_scalar(y, beta - 1.0);
        }
        let (p, q) = match side {
            FactorSide::Activations => (fixed.t().dot(&s), fixed.t().dot(&t)),
            FactorSide::Dictionary => (s.dot(&fixed.t()), t.dot(&fixed.t())),
        };
        let pen_slope = match (side, reg) {
            (FactorSide::Activations, Regularizer::L1 { alpha }) => {
                let lambda = col_sums(fixed);
                DenseMatrix::from_shape_fn(anchor.dim(), |(k, _)| alpha * lambda[k])
            }
            (FactorSide::Activations, Regularizer::Log { alpha, epsilon }) => {
                let lambda = col_sums(fixed);
                DenseMatrix::from_shape_fn(anchor.dim(), |(k, n)| {
                    alpha / (anchor[[k, n]] + epsilon / lambda[k])
                })
            }
            (FactorSide::Dictionary, Regularizer::L1 { alpha }) => {
                let rho = row_sums(fixed);
                DenseMatrix::from_shape_fn(anchor.dim(), |(_, k)| alpha * rho[k])
            }
            (FactorSide::Dictionary, Regularizer::Log { alpha, epsilon }) => {
                let lambda = col_sums(anchor);
                let mut per_column = vec![0.0; anchor.ncols()];
                for (k, slot) in per_column.iter_mut().enumerate() {
                    for n in 0..fixed.ncols() {
                        let hv = fixed[[k, n]];
                        if hv > 0.0 {
                            *slot += alpha / (lambda[k] + epsilon / hv);
                        }
                    }
                }
                DenseMatrix::from_shape_fn(anchor.dim(), |(_, k)| per_column[k])
            }
        };
        Ok(Self {
            side,
            beta,
            kappa,
            reg,
            v: v.clone(),
            fixed: fixed.clone(),
            anchor: anchor.clone(),
            p,
            q,
            pen_slope,
        })
    }

    fn check_probe(&self, x: &DenseMatrix) -> Result<()> {
        if x.dim() != self.anchor.dim() {
            return Err(Error::ShapeMismatch {
                op: "aux probe",
                left_rows: x.nrows(),
                left_cols: x.ncols(),
                right_rows: self.anchor.nrows(),
                right_cols: self.anchor.ncols(),
            });
        }
        for ((r, c), &val) in x.indexed_iter() {
            if val.is_nan() || val <= 0.0 {
                return Err(Error::UnsupportedConfig {
                    reason: format!(
                        "aux probe must be strictly positive, got {val} at ({r}, {c})"
                    ),
                });
            }
        }
        Ok(())
    }
}

/// The one-dimensional monomial upper bound on the identity: for positive
/// h, anchor and beta > 1, h <= (anchor/beta) (h/anchor)^beta
/// + anchor (1 - 1/beta), tight at h = anchor.
pub fn monomial_upper_bound(h: f64, anchor: f64, beta: f64) -> f64 {
    anchor / beta * (h / anchor).powf(beta) + anchor * (1.0 - 1.0 / beta)
}

/// Tangent upper bound of x -> ln(x + epsilon) at the anchor.
pub fn log_tangent_upper_bound(x: f64, anchor: f64, epsilon: f64) -> f64 {
    (anchor + epsilon).ln() + (x - anchor) / (anchor + epsilon)
}

/// Data-fit part of the auxiliary bound (four beta regimes), up to an
/// additive constant; compare differences against the anchor only.
pub fn data_fit_majorizer(x: &DenseMatrix, ctx: &AuxContext) -> Result<f64> {
    ctx.check_probe(x)?;
    let beta = ctx.beta;
    let mut total = 0.0;
    for ((i, j), &xv) in x.indexed_iter() {
        let a = ctx.anchor[[i, j]];
        let (p, q) = (ctx.p[[i, j]], ctx.q[[i, j]]);
        let r = xv / a;
        total += if beta < 1.0 {
            q * xv - p * a * r.powf(beta - 1.0) / (beta - 1.0)
        } else if beta == 1.0 {
            q * xv - p * a * r.ln()
        } else if beta <= 2.0 {
            q * a * r.powf(beta) / beta - p * a * r.powf(beta - 1.0) / (beta - 1.0)
        } else {
            q * a * r.powf(beta) / beta - p * xv
        };
    }
    Ok(total)
}

/// Penalty part of the auxiliary bound: exact/tangent linear term for
/// beta <= 1, monomial bound for beta > 1. The slope already includes alpha.
pub fn penalty_majorizer(x: &DenseMatrix, ctx: &AuxContext) -> Result<f64> {
    ctx.check_probe(x)?;
    let beta = ctx.beta;
    let mut total = 0.0;
    for ((i, j), &xv) in x.indexed_iter() {
        let s = ctx.pen_slope[[i, j]];
        if beta <= 1.0 {
            total += s * xv;
        } else {
            let a = ctx.anchor[[i, j]];
            total += s * a * (xv / a).powf(beta) / beta;
        }
    }
    Ok(total)
}

/// Full auxiliary bound, up to an additive constant.
pub fn aux_value(x: &DenseMatrix, ctx: &AuxContext) -> Result<f64> {
    Ok(data_fit_majorizer(x, ctx)? + penalty_majorizer(x, ctx)?)
}

/// The true restricted objective the bound majorizes: kappa-shifted data fit
/// plus the penalty, as a function of the variable factor alone.
pub fn restricted_objective(x: &DenseMatrix, ctx: &AuxContext) -> Result<f64> {
    ctx.check_probe(x)?;
    let product = match ctx.side {
        FactorSide::Activations => ctx.fixed.dot(x),
        FactorSide::Dictionary => x.dot(&ctx.fixed),
    };
    let mut fit = 0.0;
    for ((f, n), &y) in product.indexed_iter() {
        fit += beta_div_scalar(ctx.v[[f, n]] + ctx.kappa, y + ctx.kappa, ctx.beta)?;
    }
    let pen = match (ctx.side, ctx.reg) {
        (FactorSide::Activations, Regularizer::L1 { alpha }) => {
            let lambda = col_sums(&ctx.fixed);
            x.indexed_iter()
                .map(|((k, _), &xv)| alpha * lambda[k] * xv)
                .sum()
        }
        (FactorSide::Activations, Regularizer::Log { alpha, epsilon }) => {
            let lambda = col_sums(&ctx.fixed);
            x.indexed_iter()
                .map(|((k, _), &xv)| alpha * (lambda[k] * xv + epsilon).ln())
                .sum()
        }
        (FactorSide::Dictionary, Regularizer::L1 { alpha }) => {
            let rho = row_sums(&ctx.fixed);
            x.indexed_iter()
                .map(|((_, k), &xv)| alpha * rho[k] * xv)
                .sum()
        }
        (FactorSide::Dictionary, Regularizer::Log { alpha, epsilon }) => {
            let lambda = col_sums(x);
            let mut total = 0.0;
            for ((k, _), &hv) in ctx.fixed.indexed_iter() {
                total += alpha * (lambda[k] * hv + epsilon).ln();
            }
            total
        }
    };
    Ok(fit + pen)
}

/// Analytic per-entry gradient of the auxiliary bound; a function of the
/// entry ratio x/anchor given the anchor products and penalty slope.
pub fn aux_gradient(x: &DenseMatrix, ctx: &AuxContext) -> Result<DenseMatrix> {
    ctx.check_probe(x)?;
    let beta = ctx.beta;
    let mut out = DenseMatrix::zeros(x.dim());
    for ((i, j), &xv) in x.indexed_iter() {
        let r = xv / ctx.anchor[[i, j]];
        let (p, q, s) = (ctx.p[[i, j]], ctx.q[[i, j]], ctx.pen_slope[[i, j]]);
        let fit = if beta < 1.0 {
            q - p * r.powf(beta - 2.0)
        } else if beta == 1.0 {
            q - p / r
        } else if beta <= 2.0 {
            q * r.powf(beta - 1.0) - p * r.powf(beta - 2.0)
        } else {
            q * r.powf(beta - 1.0) - p
        };
        let pen = if beta <= 1.0 { s } else { s * r.powf(beta - 1.0) };
        out[[i, j]] = fit + pen;
    }
    Ok(out)
}

/// Analytic per-entry second derivative of the auxiliary bound; positive
/// everywhere the anchor products are, which is the strict-convexity part of
/// the descent argument.
pub fn aux_second_derivative(x: &DenseMatrix, ctx: &AuxContext) -> Result<DenseMatrix> {
    ctx.check_probe(x)?;
    let beta = ctx.beta;
    let mut out = DenseMatrix::zeros(x.dim());
    for ((i, j), &xv) in x.indexed_iter() {
        let a = ctx.anchor[[i, j]];
        let r = xv / a;
        let (p, q, s) = (ctx.p[[i, j]], ctx.q[[i, j]], ctx.pen_slope[[i, j]]);
        let fit = if beta < 1.0 {
            p * (2.0 - beta) * r.powf(beta - 3.0)
        } else if beta == 1.0 {
            p / (r * r)
        } else if beta <= 2.0 {
            q * (beta - 1.0) * r.powf(beta - 2.0) + p * (2.0 - beta) * r.powf(beta - 3.0)
        } else {
            q * (beta - 1.0) * r.powf(beta - 2.0)
        };
        let pen = if beta > 1.0 {
            s * (beta - 1.0) * r.powf(beta - 2.0)
        } else {
            0.0
        };
        out[[i, j]] = (fit + pen) / a;
    }
    Ok(out)
}

/// Coordinatewise argmin of the auxiliary bound by derivative-sign bisection
/// on (1e-8 * anchor, 1e8 * anchor), run in log space to 1e-13 relative
/// width. This is the brute-force route the closed-form updates are checked
/// against. Entries with a zero numerator product minimize at zero.
pub fn aux_argmin(ctx: &AuxContext) -> Result<DenseMatrix> {
    let beta = ctx.beta;
    let mut out = DenseMatrix::zeros(ctx.anchor.dim());
    let (u_lo, u_hi) = ((1e-8f64).ln(), (1e8f64).ln());
    for ((i, j), slot) in out.indexed_iter_mut() {
        let a = ctx.anchor[[i, j]];
        let (p, q, s) = (ctx.p[[i, j]], ctx.q[[i, j]], ctx.pen_slope[[i, j]]);
        if p == 0.0 {
            *slot = 0.0;
            continue;
        }
        let grad_at = |u: f64| -> f64 {
            let r = u.exp();
            let fit = if beta < 1.0 {
                q - p * r.powf(beta - 2.0)
            } else if beta == 1.0 {
                q - p / r
            } else if beta <= 2.0 {
                q * r.powf(beta - 1.0) - p * r.powf(beta - 2.0)
            } else {
                q * r.powf(beta - 1.0) - p
            };
            let pen = if beta <= 1.0 { s } else { s * r.powf(beta - 1.0) };
            fit + pen
        };
        if grad_at(u_lo) >= 0.0 {
            *slot = a * u_lo.exp();
            continue;
        }
        if grad_at(u_hi) <= 0.0 {
            *slot = a * u_hi.exp();
            continue;
        }
        let (mut lo, mut hi) = (u_lo, u_hi);
        while hi - lo > 1e-13 {
            let mid = 0.5 * (lo + hi);
            if grad_at(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        *slot = a * (0.5 * (lo + hi)).exp();
    }
    Ok(out)
}

/// Central-difference gradient with per-entry step rel_step * (x + rel_step).
pub fn fd_gradient<F>(f: F, x: &DenseMatrix, rel_step: f64) -> Result<DenseMatrix>
where
    F: Fn(&DenseMatrix) -> Result<f64>,
{
    let mut out = DenseMatrix::zeros(x.dim());
    for (idx, slot) in out.indexed_iter_mut() {
        let step = rel_step * (x[idx] + rel_step);
        let mut plus = x.clone();
        plus[idx] += step;
        let mut minus = x.clone();
        minus[idx] -= step;
        let fp = f(&plus)?;
        let fm = f(&minus)?;
        let g = (fp - fm) / (2.0 * step);
        if !g.is_finite() {
            return Err(Error::NonFiniteEntry {
                row: idx.0,
                col: idx.1,
                value: g,
            });
        }
        *slot = g;
    }
    Ok(out)
}

/// Outcome of sampling the five descent-argument properties on one context:
/// majorization, tightness at the anchor, ratio dependence of the gradient,
/// first-order agreement at the anchor, and strict convexity.
#[derive(Debug, Clone)]
pub struct PropertyReport {
    pub probes: usize,
    pub seed: u64,
    pub majorization_violations: usize,
    /// Smallest observed (bound - objective) difference gap; negative means
    /// a violation.
    pub worst_majorization_gap: f64,
    pub tightness_ok: bool,
    pub ratio_dependence_violations: usize,
    pub anchor_gradient_max_err: f64,
    pub anchor_gradient_ok: bool,
    pub convexity_violations: usize,
}

impl PropertyReport {
    pub fn all_ok(&self) -> bool {
        self.majorization_violations == 0
            && self.tightness_ok
            && self.ratio_dependence_violations == 0
            && self.anchor_gradient_ok
            && self.convexity_violations == 0
    }
}

/// Sample the five properties with `n_probes` random ratio probes around the
/// anchor (ratios log-uniform in [0.1, 10]).
pub fn check_mm_properties(ctx: &AuxContext, n_probes: usize, seed: u64) -> Result<PropertyReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g_anchor = aux_value(&ctx.anchor, ctx)?;
    let c_anchor = restricted_objective(&ctx.anchor, ctx)?;

    // tightness: the difference form vanishes identically at the anchor
    let tightness_ok = (aux_value(&ctx.anchor, ctx)? - g_anchor).abs() <= 1e-12
        && (restricted_objective(&ctx.anchor, ctx)? - c_anchor).abs() <= 1e-12;

    let mut majorization_violations = 0;
    let mut worst_gap = f64::INFINITY;
    let mut convexity_violations = 0;
    let spread = 10f64.ln();
    for _ in 0..n_probes {
        let probe = DenseMatrix::from_shape_fn(ctx.anchor.dim(), |idx| {
            ctx.anchor[idx] * rng.random_range(-spread..spread).exp()
        });
        let dg = aux_value(&probe, ctx)? - g_anchor;
        let dc = restricted_objective(&probe, ctx)? - c_anchor;
        let gap = dg - dc;
        worst_gap = worst_gap.min(gap);
        if gap < -1e-9 {
            majorization_violations += 1;
        }
        if aux_second_derivative(&probe, ctx)?.iter().any(|&d| d <= 0.0) {
            convexity_violations += 1;
        }
    }
    if n_probes == 0 {
        worst_gap = 0.0;
    }

    // gradient depends on the probe only through the ratios: rescale probe
    // and anchor jointly, holding the anchor products fixed
    let mut ratio_dependence_violations = 0;
    for _ in 0..n_probes.min(64) {
        let ratios = DenseMatrix::from_shape_fn(ctx.anchor.dim(), |_| {
            rng.random_range(-spread..spread).exp()
        });
        let scale = rng.random_range(0.2..5.0);
        let probe1 = &ratios * &ctx.anchor;
        let grad1 = aux_gradient(&probe1, ctx)?;
        let mut scaled_ctx = ctx.clone();
        scaled_ctx.anchor = &ctx.anchor * scale;
        let probe2 = &ratios * &scaled_ctx.anchor;
        let grad2 = aux_gradient(&probe2, &scaled_ctx)?;
        for (a, b) in grad1.iter().zip(grad2.iter()) {
            if (a - b).abs() > 1e-12 * (1.0 + a.abs()) {
                ratio_dependence_violations += 1;
                break;
            }
        }
    }

    // first-order agreement with the true objective at the anchor
    let analytic = aux_gradient(&ctx.anchor, ctx)?;
    let numeric = fd_gradient(|x| restricted_objective(x, ctx), &ctx.anchor, 1e-6)?;
    let mut anchor_gradient_max_err = 0.0f64;
    for (a, b) in analytic.iter().zip(numeric.iter()) {
        anchor_gradient_max_err =
            anchor_gradient_max_err.max((a - b).abs() / (1.0 + b.abs()));
    }
    let anchor_gradient_ok = anchor_gradient_max_err <= 1e-5;

    Ok(PropertyReport {
        probes: n_probes,
        seed,
        majorization_violations,
        worst_majorization_gap: worst_gap,
        tightness_ok,
        ratio_dependence_violations,
        anchor_gradient_max_err,
        anchor_gradient_ok,
        convexity_violations,
    })
}
