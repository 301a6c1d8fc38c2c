//! Iteration drivers: half-normal initialization, the relative-change
//! stopping rule, final rescaling, trace recording, and the multi-seed
//! benchmark harness.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::{col_sums, DataMatrix, DenseMatrix};
use crate::objective::{objective, Regularizer};
use crate::updates_l1::{
    heur_update_h, heur_update_w, lagr_update_h, lagr_update_w, mm_update_h, mm_update_w,
    MULTIPLIER_TOL,
};
use crate::updates_log::{heur_log_update_h, mm_log_update_h, mm_log_update_w};

/// Update family driving the factorization.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    /// Majorization-minimization multiplicative updates; monotone by design.
    Mm,
    /// Gradient-split heuristic with column renormalization.
    Heuristic,
    /// Lagrangian updates with a per-column multiplier search (beta <= 1, l1).
    Lagrangian,
}

impl Method {
    pub fn label(&self) -> &'static str {
        match self {
            Method::Mm => "mm",
            Method::Heuristic => "heur",
            Method::Lagrangian => "lagr",
        }
    }
}

/// Everything a single run needs besides the data matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Inner rank K.
    pub k: usize,
    pub beta: f64,
    pub method: Method,
    pub regularizer: Regularizer,
    /// Stabilization constant added to both V and WH.
    pub kappa: f64,
    /// Relative-change stopping tolerance.
    pub delta: f64,
    pub max_iter: usize,
    /// Seed for the half-normal initialization.
    pub seed: u64,
    /// Standard deviation of the folded Gaussian used for initialization.
    pub init_sigma: f64,
}

impl SolverConfig {
    pub fn new(k: usize, beta: f64, method: Method, regularizer: Regularizer) -> Self {
        Self {
            k,
            beta,
            method,
            regularizer,
            kappa: 1e-12,
            delta: 1e-5,
            max_iter: 5000,
            seed: 0,
            init_sigma: 5.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |reason: String| Err(Error::UnsupportedConfig { reason });
        if self.k == 0 {
            return fail("rank K must be at least 1".into());
        }
        if !self.beta.is_finite() {
            return fail(format!("beta must be finite (got {})", self.beta));
        }
        if self.delta.is_nan() || self.delta <= 0.0 {
            return fail(format!("delta must be positive (got {})", self.delta));
        }
        if self.kappa.is_nan() || self.kappa < 0.0 {
            return fail(format!("kappa must be nonnegative (got {})", self.kappa));
        }
        if self.init_sigma.is_nan() || self.init_sigma <= 0.0 {
            return fail(format!(
                "init_sigma must be positive (got {})",
                self.init_sigma
            ));
        }
        if self.regularizer.alpha() < 0.0 {
            return fail(format!(
                "alpha must be nonnegative (got {})",
                self.regularizer.alpha()
            ));
        }
        if let Regularizer::Log { epsilon, .. } = self.regularizer {
            if epsilon.is_nan() || epsilon <= 0.0 {
                return fail(format!("epsilon must be positive (got {epsilon})"));
            }
        }
        if self.method == Method::Lagrangian {
            if matches!(self.regularizer, Regularizer::Log { .. }) {
                return fail("the Lagrangian method only supports the l1 regularizer".into());
            }
            if self.beta > 1.0 {
                return fail(format!(
                    "the Lagrangian method is only available for beta <= 1 (got beta = {})",
                    self.beta
                ));
            }
        }
        Ok(())
    }

    /// The objective this configuration monitors.
    pub fn objective(&self, v: &DataMatrix, w: &DenseMatrix, h: &DenseMatrix) -> Result<f64> {
        objective(v, w, h, self.beta, &self.regularizer, self.kappa)
    }
}

/// The factorization state, dictionary and activations.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorPair {
    pub w: DenseMatrix,
    pub h: DenseMatrix,
}

/// How a run terminated.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RunStatus {
    Converged,
    MaxIterReached,
    Failed(String),
}

impl RunStatus {
    pub fn label(&self) -> String {
        match self {
            RunStatus::Converged => "converged".into(),
            RunStatus::MaxIterReached => "max_iter".into(),
            RunStatus::Failed(reason) => format!("failed: {reason}"),
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, RunStatus::Failed(_))
    }
}

/// One row of the per-iteration trace. Iteration 0 records the initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord {
    pub iteration: usize,
    pub objective: f64,
    /// Cumulative CPU seconds of the running thread, excluding serialization.
    pub cpu_seconds: f64,
    /// max_k | ||w_k||_1 - 1 |; a feasibility diagnostic for the normalized
    /// methods and a plain scale diagnostic for MM.
    pub norm_residual: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub records: Vec<TraceRecord>,
    pub status: RunStatus,
}

impl IterationTrace {
    /// Number of completed (H, W) sweeps; the trace holds one more record
    /// for the initial state.
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn final_objective(&self) -> f64 {
        self.records.last().map_or(f64::NAN, |r| r.objective)
    }
}

#[cfg(unix)]
fn thread_cpu_seconds() -> f64 {
    let mut ts = libc::timespec {
        tv_sec: 0,
        tv_nsec: 0,
    };
    let rc = unsafe { libc::clock_gettime(libc::CLOCK_THREAD_CPUTIME_ID, &mut ts) };
    if rc == 0 {
        ts.tv_sec as f64 + ts.tv_nsec as f64 * 1e-9
    } else {
        0.0
    }
}

#[cfg(not(unix))]
fn thread_cpu_seconds() -> f64 {
    use std::time::{SystemTime, UNIX_EPOCH};
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

/// Draw a factor pair with entries |g|, g ~ Normal(0, sigma^2), from a seeded
/// generator. W is filled first, then H, both in row-major order.
pub fn init_half_normal(f: usize, n: usize, k: usize, seed: u64, sigma: f64) -> FactorPair {
    use rand::SeedableRng;
    use rand_distr::Distribution;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, sigma).expect("sigma must be positive and finite");
    let mut draw = || -> f64 { normal.sample(&mut rng).abs() };
    let w = DenseMatrix::from_shape_fn((f, k), |_| draw());
    let h = DenseMatrix::from_shape_fn((k, n), |_| draw());
    FactorPair { w, h }
}

/// Relative-change stopping rule: |J_prev - J_curr| / |J_curr| <= delta.
/// The absolute value in the denominator matters because the log-regularized
/// objective can be negative. A current objective of exactly zero counts as
/// converged (no progress left to measure).
pub fn should_stop(j_prev: f64, j_curr: f64, delta: f64) -> bool {
    if j_curr == 0.0 {
        return true;
    }
    (j_prev - j_curr).abs() / j_curr.abs() <= delta
}

/// Move the column norms of W into H: (W diag^-1, diag H). Preserves the
/// product and both scale-invariant objectives. All-zero columns are left
/// untouched with a warning.
pub fn rescale(pair: FactorPair) -> FactorPair {
    let FactorPair { mut w, mut h } = pair;
    let norms = col_sums(&w);
    for k in 0..w.ncols() {
        let lambda = norms[k];
        if lambda == 0.0 {
            log::warn!("rescale: column {k} of W is identically zero, leaving it untouched");
            continue;
        }
        w.column_mut(k).mapv_inplace(|x| x / lambda);
        h.row_mut(k).mapv_inplace(|x| x * lambda);
    }
    FactorPair { w, h }
}

/// max_k | ||w_k||_1 - 1 | over the dictionary columns.
pub fn max_norm_deviation(w: &DenseMatrix) -> f64 {
    col_sums(w)
        .iter()
        .map(|&s| (s - 1.0).abs())
        .fold(0.0, f64::max)
}

fn sweep(
    v: &DataMatrix,
    w: &DenseMatrix,
    h: &DenseMatrix,
    config: &SolverConfig,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let beta = config.beta;
    let kappa = config.kappa;
    match (config.method, &config.regularizer) {
        (Method::Mm, Regularizer::L1 { alpha }) => {
            let h1 = mm_update_h(v, w, h, beta, *alpha, kappa)?;
            let w1 = mm_update_w(v, w, &h1, beta, *alpha, kappa)?;
            Ok((w1, h1))
        }
        (Method::Mm, Regularizer::Log { alpha, epsilon }) => {
            let h1 = mm_log_update_h(v, w, h, beta, *alpha, *epsilon, kappa)?;
            let w1 = mm_log_update_w(v, w, &h1, beta, *alpha, *epsilon, kappa)?;
            Ok((w1, h1))
        }
        (Method::Heuristic, Regularizer::L1 { alpha }) => {
            let h1 = heur_update_h(v, w, h, beta, *alpha, kappa)?;
            let w1 = heur_update_w(v, w, &h1, beta, kappa)?;
            Ok((w1, h1))
        }
        (Method::Heuristic, Regularizer::Log { alpha, epsilon }) => {
            let h1 = heur_log_update_h(v, w, h, beta, *alpha, *epsilon, kappa)?;
            let w1 = heur_update_w(v, w, &h1, beta, kappa)?;
            Ok((w1, h1))
        }
        (Method::Lagrangian, Regularizer::L1 { alpha }) => {
            let h1 = lagr_update_h(v, w, h, beta, *alpha, kappa)?;
            let w1 = lagr_update_w(v, w, &h1, beta, kappa, MULTIPLIER_TOL)?;
            Ok((w1, h1))
        }
        (Method::Lagrangian, Regularizer::Log { .. }) => Err(Error::UnsupportedConfig {
            reason: "the Lagrangian method only supports the l1 regularizer".into(),
        }),
    }
}

/// Run one factorization: alternate one update of H and one of W per
/// iteration, evaluate the objective after each full sweep, stop on the
/// relative-change rule or the iteration cap. MM iterates run unnormalized
/// and are rescaled once at the end; the heuristic and Lagrangian methods
/// maintain unit-norm dictionary columns throughout.
///
/// Update errors during the loop are reported through
/// `RunStatus::Failed` with the iteration index; the factors returned are
/// the last consistent iterate.
pub fn run(
    v: &DataMatrix,
    config: &SolverConfig,
    init: Option<FactorPair>,
) -> Result<(FactorPair, IterationTrace)> {
    config.validate()?;
    let (f, n) = (v.rows(), v.cols());

    // Sparse inputs are densified once up front: S and T are dense for
    // general beta anyway, and running the same arithmetic path makes sparse
    // and dense loads of the same matrix produce identical traces.
    let densified;
    let v_iter: &DataMatrix = match v {
        DataMatrix::Sparse(_) => {
            densified = DataMatrix::Dense(v.to_dense().into_owned());
            &densified
        }
        dense => dense,
    };

    let mut pair = match init {
        Some(p) => {
            if p.w.dim() != (f, config.k) || p.h.dim() != (config.k, n) {
                return Err(Error::ShapeMismatch {
                    op: "run: initialization",
                    left_rows: p.w.nrows(),
                    left_cols: p.w.ncols(),
                    right_rows: p.h.nrows(),
                    right_cols: p.h.ncols(),
                });
            }
            p
        }
        None => init_half_normal(f, n, config.k, config.seed, config.init_sigma),
    };
    if config.method != Method::Mm {
        pair = rescale(pair);
    }

    let cpu_start = thread_cpu_seconds();
    let mut records = Vec::with_capacity(config.max_iter.min(10_000) + 1);
    let mut j_prev = config.objective(v_iter, &pair.w, &pair.h)?;
    records.push(TraceRecord {
        iteration: 0,
        objective: j_prev,
        cpu_seconds: thread_cpu_seconds() - cpu_start,
        norm_residual: max_norm_deviation(&pair.w),
    });

    let mut status = RunStatus::MaxIterReached;
    let mut warned_degenerate = false;
    for iteration in 1..=config.max_iter {
        match sweep(v_iter, &pair.w, &pair.h, config) {
            Ok((w_next, h_next)) => {
                pair.w = w_next;
                pair.h = h_next;
            }
            Err(e) => {
                status = RunStatus::Failed(format!("iteration {iteration}: {e}"));
                break;
            }
        }
        let j = match config.objective(v_iter, &pair.w, &pair.h) {
            Ok(j) => j,
            Err(e) => {
                status = RunStatus::Failed(format!("iteration {iteration}: {e}"));
                break;
            }
        };
        let residual = max_norm_deviation(&pair.w);
        records.push(TraceRecord {
            iteration,
            objective: j,
            cpu_seconds: thread_cpu_seconds() - cpu_start,
            norm_residual: residual,
        });
        log::debug!(
            "iteration {iteration}: objective {j:.6e}, norm residual {residual:.3e}"
        );
        if !warned_degenerate && col_sums(&pair.w).iter().any(|&s| s == 0.0) {
            log::warn!("a dictionary column became identically zero; it stays frozen from here");
            warned_degenerate = true;
        }
        if should_stop(j_prev, j, config.delta) {
            status = RunStatus::Converged;
            break;
        }
        j_prev = j;
    }

    if config.method == Method::Mm {
        pair = rescale(pair);
    } else {
        let residual = max_norm_deviation(&pair.w);
        if residual > 1e-8 && !status.is_failed() {
            log::warn!("normalized method finished with column-norm residual {residual:.3e}");
        }
    }
    Ok((pair, IterationTrace { records, status }))
}

/// One benchmark row: a (configuration, seed) run reduced to its endpoint.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub method: String,
    pub regularizer: String,
    pub beta: f64,
    pub alpha: f64,
    pub seed: u64,
    /// Final objective divided by F*N.
    pub objective_norm: f64,
    pub cpu_seconds: f64,
    pub iterations: usize,
    pub status: String,
}

/// Mean/standard-deviation summary of the successful runs of one
/// configuration.
#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub method: String,
    pub regularizer: String,
    pub beta: f64,
    pub alpha: f64,
    pub runs: usize,
    pub failed: usize,
    pub objective_norm_mean: f64,
    pub objective_norm_std: f64,
    pub cpu_seconds_mean: f64,
    pub cpu_seconds_std: f64,
    pub iterations_mean: f64,
    pub iterations_std: f64,
}

fn run_report(v: &DataMatrix, config: &SolverConfig) -> RunReport {
    let scale = (v.rows() * v.cols()) as f64;
    let (objective_norm, cpu_seconds, iterations, status) = match run(v, config, None) {
        Ok((_, trace)) => (
            trace.final_objective() / scale,
            trace.records.last().map_or(0.0, |r| r.cpu_seconds),
            trace.iterations(),
            trace.status.label(),
        ),
        Err(e) => (f64::NAN, 0.0, 0, format!("failed: {e}")),
    };
    RunReport {
        method: config.method.label().into(),
        regularizer: config.regularizer.label().into(),
        beta: config.beta,
        alpha: config.regularizer.alpha(),
        seed: config.seed,
        objective_norm,
        cpu_seconds,
        iterations,
        status,
    }
}

/// Run every configuration from `n_seeds` seeded initializations
/// (`config.seed + 0 .. + n_seeds`). Individual failures become rows with a
/// failed status instead of aborting the batch. `jobs > 1` distributes runs
/// over that many threads; rows come back in deterministic order either way.
pub fn benchmark(
    v: &DataMatrix,
    configs: &[SolverConfig],
    n_seeds: usize,
    jobs: usize,
) -> Vec<RunReport> {
    let densified;
    let v_shared: &DataMatrix = match v {
        DataMatrix::Sparse(_) => {
            densified = DataMatrix::Dense(v.to_dense().into_owned());
            &densified
        }
        dense => dense,
    };
    let tasks: Vec<SolverConfig> = configs
        .iter()
        .flat_map(|cfg| {
            (0..n_seeds).map(move |s| {
                let mut c = cfg.clone();
                c.seed = cfg.seed + s as u64;
                c
            })
        })
        .collect();

    if jobs <= 1 {
        return tasks.iter().map(|c| run_report(v_shared, c)).collect();
    }

    let next = std::sync::atomic::AtomicUsize::new(0);
    let results = std::sync::Mutex::new(vec![None; tasks.len()]);
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(tasks.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, std::sync::atomic::Ordering::Relaxed);
                if i >= tasks.len() {
                    break;
                }
                let report = run_report(v_shared, &tasks[i]);
                results.lock().unwrap()[i] = Some(report);
            });
        }
    });
    results
        .into_inner()
        .unwrap()
        .into_iter()
        .map(|r| r.expect("every task produces a report"))
        .collect()
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Group reports by (method, regularizer, beta, alpha) and reduce the
/// successful rows to means and sample standard deviations.
pub fn summarize(reports: &[RunReport]) -> Vec<RunSummary> {
    let mut order: Vec<(String, String, f64, f64)> = Vec::new();
    for r in reports {
        let key = (r.method.clone(), r.regularizer.clone(), r.beta, r.alpha);
        if !order.contains(&key) {
            order.push(key);
        }
    }
    order
        .into_iter()
        .map(|key| {
            let group: Vec<&RunReport> = reports
                .iter()
                .filter(|r| (r.method.clone(), r.regularizer.clone(), r.beta, r.alpha) == key)
                .collect();
            let ok: Vec<&&RunReport> = group
                .iter()
                .filter(|r| !r.status.starts_with("failed"))
                .collect();
            let (obj_mean, obj_std) =
                mean_std(&ok.iter().map(|r| r.objective_norm).collect::<Vec<_>>());
            let (cpu_mean, cpu_std) =
                mean_std(&ok.iter().map(|r| r.cpu_seconds).collect::<Vec<_>>());
            let (it_mean, it_std) =
                mean_std(&ok.iter().map(|r| r.iterations as f64).collect::<Vec<_>>());
            RunSummary {
                method: key.0,
                regularizer: key.1,
                beta: key.2,
                alpha: key.3,
                runs: group.len(),
                failed: group.len() - ok.len(),
                objective_norm_mean: obj_mean,
                objective_norm_std: obj_std,
                cpu_seconds_mean: cpu_mean,
                cpu_seconds_std: cpu_std,
                iterations_mean: it_mean,
                iterations_std: it_std,
            }
        })
        .collect()
}
