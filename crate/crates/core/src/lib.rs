//! Sparse nonnegative matrix factorization with the beta-divergence.
//!
//! Factorizes a nonnegative F x N matrix V into W H with nonnegative factors
//! and a sparsity penalty (l1 or log) on the activations H, keeping the scale
//! ambiguity pinned through unit l1 norms on the dictionary columns. Three
//! update families are provided:
//!
//! * majorization-minimization multiplicative updates on the equivalent
//!   scale-invariant objective, valid for every beta, with guaranteed
//!   monotone descent and a final renormalization;
//! * the classic gradient-split heuristic with per-sweep renormalization
//!   (fast in practice, no descent guarantee);
//! * Lagrangian updates with a Newton-Raphson multiplier search per
//!   dictionary column (l1 penalty, beta <= 1 only).
//!
//! The [`oracle`] module materializes the auxiliary upper bounds behind the
//! MM derivation and exposes brute-force argmin and property checks used by
//! the verification suites.

pub mod error;
pub mod io;
pub mod matrix;
pub mod objective;
pub mod oracle;
pub mod solver;
pub mod updates_l1;
pub mod updates_log;

pub use error::{Error, Result};
pub use matrix::{DataMatrix, DenseMatrix};
pub use objective::{objective, Regularizer};
pub use solver::{
    benchmark, init_half_normal, rescale, run, should_stop, summarize, FactorPair,
    IterationTrace, Method, RunReport, RunStatus, SolverConfig,
};
