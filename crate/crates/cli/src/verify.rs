//! Randomized verification suites exposed by the `verify` subcommand:
//! majorization sampling, descent spot checks, stationarity at convergence,
//! and cross-method update identities.

use std::process::ExitCode;

use clap::ValueEnum;
use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snmf_core::matrix::DataMatrix;
use snmf_core::objective::objective;
use snmf_core::oracle::{check_mm_properties, AuxContext, FactorSide};
use snmf_core::solver::{run, Method, SolverConfig};
use snmf_core::updates_l1::{heur_update_h, lagr_update_h, mm_update_h, mm_update_w};
use snmf_core::updates_log::{mm_log_update_h, mm_log_update_w};
use snmf_core::Regularizer;

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Suite {
    /// Sample the auxiliary-bound properties on random small instances
    Majorization,
    /// One MM sweep never increases the objective
    Descent,
    /// Finite-difference stationarity at converged interior coordinates
    Kkt,
    /// Lagrangian and heuristic updates coincide with MM where the formulas do
    CrossMethod,
}

const BETA_GRID: [f64; 8] = [-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0];

fn regularizers() -> [Regularizer; 2] {
    [
        Regularizer::L1 { alpha: 0.7 },
        Regularizer::Log {
            alpha: 0.7,
            epsilon: 0.01,
        },
    ]
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Array2<f64> {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.05..4.0))
}

fn random_dims(rng: &mut ChaCha8Rng) -> (usize, usize, usize) {
    (
        rng.random_range(2..6usize),
        rng.random_range(2..6usize),
        rng.random_range(1..4usize),
    )
}

fn normalize_cols(w: &Array2<f64>) -> Array2<f64> {
    let mut out = w.clone();
    for k in 0..out.ncols() {
        let norm: f64 = out.column(k).sum();
        out.column_mut(k).mapv_inplace(|x| x / norm);
    }
    out
}

pub fn run_suite(suite: Suite, trials: usize, seed: u64) -> anyhow::Result<ExitCode> {
    if trials == 0 {
        println!("0 checks requested: vacuous pass");
        return Ok(ExitCode::SUCCESS);
    }
    let violations = match suite {
        Suite::Majorization => majorization(trials, seed)?,
        Suite::Descent => descent(trials, seed)?,
        Suite::Kkt => kkt(trials, seed)?,
        Suite::CrossMethod => cross_method(trials, seed)?,
    };
    if violations == 0 {
        println!("0 violations");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("{violations} violations");
        Ok(ExitCode::FAILURE)
    }
}

fn majorization(trials: usize, seed: u64) -> anyhow::Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    for &beta in &BETA_GRID {
        for reg in regularizers() {
            for side in [FactorSide::Activations, FactorSide::Dictionary] {
                let (f, n, k) = random_dims(&mut rng);
                let v = random_matrix(&mut rng, f, n);
                let w = random_matrix(&mut rng, f, k);
                let h = random_matrix(&mut rng, k, n);
                let ctx = match side {
                    FactorSide::Activations => {
                        AuxContext::new(side, &v, &w, &h, beta, reg, 1e-12)?
                    }
                    FactorSide::Dictionary => {
                        AuxContext::new(side, &v, &h, &w, beta, reg, 1e-12)?
                    }
                };
                let report = check_mm_properties(&ctx, trials, rng.random())?;
                if !report.all_ok() {
                    violations += report.majorization_violations
                        + report.ratio_dependence_violations
                        + report.convexity_violations
                        + usize::from(!report.tightness_ok)
                        + usize::from(!report.anchor_gradient_ok);
                    println!(
                        "beta={beta} {} {side:?}: {report:?}",
                        reg.label()
                    );
                }
            }
        }
    }
    println!(
        "majorization: sampled {} probes per (beta, regularizer, side) point",
        trials
    );
    Ok(violations)
}

fn descent(trials: usize, seed: u64) -> anyhow::Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut checks = 0;
    for trial in 0..trials {
        let beta = BETA_GRID[rng.random_range(0..BETA_GRID.len())];
        for reg in regularizers() {
            let (f, n, k) = random_dims(&mut rng);
            let v = DataMatrix::dense(random_matrix(&mut rng, f, n))?;
            let w = random_matrix(&mut rng, f, k);
            let h = random_matrix(&mut rng, k, n);
            let kappa = 1e-12;
            let alpha = reg.alpha();
            let j0 = objective(&v, &w, &h, beta, &reg, kappa)?;
            let (w1, h1) = match reg {
                Regularizer::L1 { .. } => {
                    let h1 = mm_update_h(&v, &w, &h, beta, alpha, kappa)?;
                    let w1 = mm_update_w(&v, &w, &h1, beta, alpha, kappa)?;
                    (w1, h1)
                }
                Regularizer::Log { epsilon, .. } => {
                    let h1 = mm_log_update_h(&v, &w, &h, beta, alpha, epsilon, kappa)?;
                    let w1 = mm_log_update_w(&v, &w, &h1, beta, alpha, epsilon, kappa)?;
                    (w1, h1)
                }
            };
            let j1 = objective(&v, &w1, &h1, beta, &reg, kappa)?;
            checks += 1;
            if j1 > j0 + 1e-9 * (1.0 + j0.abs()) {
                violations += 1;
                println!("trial {trial}: beta={beta} {} increased {j0} -> {j1}", reg.label());
            }
        }
    }
    println!("descent: {checks} MM sweeps checked");
    Ok(violations)
}

fn kkt(trials: usize, seed: u64) -> anyhow::Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut checked = 0;
    for _ in 0..trials {
        let (f, n, k) = random_dims(&mut rng);
        let v = DataMatrix::dense(random_matrix(&mut rng, f, n))?;
        let reg = if rng.random_range(0..2) == 0 {
            Regularizer::L1 { alpha: 0.1 }
        } else {
            Regularizer::Log {
                alpha: 0.1,
                epsilon: 0.01,
            }
        };
        let beta = BETA_GRID[rng.random_range(0..BETA_GRID.len())];
        let mut config = SolverConfig::new(k, beta, Method::Mm, reg);
        config.delta = 1e-10;
        config.max_iter = 20_000;
        config.seed = rng.random();
        let (pair, trace) = run(&v, &config, None)?;
        if trace.status.is_failed() {
            violations += 1;
            continue;
        }
        let j = trace.final_objective();
        let bound = 1e-3 * (1.0 + j.abs());
        let scale = pair.h.iter().cloned().fold(0.0f64, f64::max);
        for kk in 0..pair.h.nrows() {
            for nn in 0..pair.h.ncols() {
                let x = pair.h[[kk, nn]];
                if x <= 1e-4 * scale {
                    continue;
                }
                let step = 1e-6 * x;
                let mut hp = pair.h.clone();
                hp[[kk, nn]] += step;
                let mut hm = pair.h.clone();
                hm[[kk, nn]] -= step;
                let jp = objective(&v, &pair.w, &hp, beta, &reg, config.kappa)?;
                let jm = objective(&v, &pair.w, &hm, beta, &reg, config.kappa)?;
                let grad = (jp - jm) / (2.0 * step);
                checked += 1;
                if grad.abs() > bound {
                    violations += 1;
                }
            }
        }
    }
    println!("kkt: {checked} interior coordinates checked");
    Ok(violations)
}

fn cross_method(trials: usize, seed: u64) -> anyhow::Result<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut violations = 0;
    let mut checks = 0;
    for _ in 0..trials {
        let (f, n, k) = random_dims(&mut rng);
        let v = DataMatrix::dense(random_matrix(&mut rng, f, n))?;
        let w = normalize_cols(&random_matrix(&mut rng, f, k));
        let h = random_matrix(&mut rng, k, n);
        for beta in [-0.5, 0.0, 1.0] {
            let a = lagr_update_h(&v, &w, &h, beta, 0.7, 1e-12)?;
            let b = mm_update_h(&v, &w, &h, beta, 0.7, 1e-12)?;
            checks += 1;
            if !entrywise_close(&a, &b, 1e-12) {
                violations += 1;
            }
        }
        for beta in [1.0, 1.5, 2.0] {
            let a = heur_update_h(&v, &w, &h, beta, 0.7, 1e-12)?;
            let b = mm_update_h(&v, &w, &h, beta, 0.7, 1e-12)?;
            checks += 1;
            if !entrywise_close(&a, &b, 1e-12) {
                violations += 1;
            }
        }
    }
    println!("cross-method: {checks} update identities checked");
    Ok(violations)
}

fn entrywise_close(a: &Array2<f64>, b: &Array2<f64>, rel: f64) -> bool {
    a.iter()
        .zip(b.iter())
        .all(|(x, y)| (x - y).abs() <= rel * y.abs().max(1.0))
}
