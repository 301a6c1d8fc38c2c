//! End-to-end acceptance suite. Each test covers one contract of the
//! library and prints a PASS line with the measured numbers (visible with
//! `cargo test --test acceptance -- --nocapture`).

use ndarray::Array2;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use snmf_core::io::{synth_instance, SynthMode};
use snmf_core::matrix::{col_sums, DataMatrix, DenseMatrix};
use snmf_core::objective::objective;
use snmf_core::oracle::{aux_argmin, check_mm_properties, AuxContext, FactorSide};
use snmf_core::solver::{
    benchmark, init_half_normal, rescale, run, summarize, FactorPair, Method, RunStatus,
    SolverConfig,
};
use snmf_core::updates_l1::{
    heur_update_h, lagr_update_h, mm_update_h, mm_update_w, solve_multiplier,
};
use snmf_core::updates_log::{mm_log_update_h, mm_log_update_w};
use snmf_core::Regularizer;

fn fig1_data() -> DataMatrix {
    synth_instance(50, 40, 3, 4242, 5.0, SynthMode::HalfNormal)
        .unwrap()
        .0
}

fn fig1_config(method: Method) -> SolverConfig {
    SolverConfig::new(3, -0.5, method, Regularizer::L1 { alpha: 5.0 })
}

fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DenseMatrix {
    Array2::from_shape_fn((rows, cols), |_| rng.random_range(0.05..4.0))
}

fn normalize_cols(w: &DenseMatrix) -> DenseMatrix {
    let mut out = w.clone();
    for k in 0..out.ncols() {
        let norm: f64 = out.column(k).sum();
        out.column_mut(k).mapv_inplace(|x| x / norm);
    }
    out
}

fn monotone_within(records: &[snmf_core::solver::TraceRecord], rel: f64) -> bool {
    records
        .windows(2)
        .all(|w| w[1].objective <= w[0].objective + rel * w[0].objective.abs())
}

/// Synthetic descent reproduction: 50 seeded initializations on a 50x40
/// half-normal matrix with K = 3, beta = -0.5, alpha = 5. The MM trace must
/// be non-increasing at every iteration of every run; the heuristic trace is
/// recorded and its oscillation count reported, not asserted.
#[test]
fn descent_reproduction_on_synthetic() {
    let v = fig1_data();
    let mut oscillating_seeds = 0;
    for seed in 0..50 {
        let mut mm = fig1_config(Method::Mm);
        mm.seed = seed;
        mm.max_iter = 100;
        mm.delta = 1e-14;
        let (_, trace) = run(&v, &mm, None).unwrap();
        assert!(!trace.status.is_failed(), "seed {seed}: {:?}", trace.status);
        assert!(
            monotone_within(&trace.records, 1e-9),
            "seed {seed}: MM objective increased"
        );

        let mut heur = fig1_config(Method::Heuristic);
        heur.seed = seed;
        heur.max_iter = 100;
        heur.delta = 1e-14;
        let (_, trace) = run(&v, &heur, None).unwrap();
        assert!(!trace.status.is_failed());
        if !monotone_within(&trace.records, 1e-12) {
            oscillating_seeds += 1;
        }
    }
    println!(
        "PASS descent reproduction: MM non-increasing in 50/50 seeds; \
         heuristic oscillation observed in {oscillating_seeds}/50 seeds"
    );
}

/// Majorization suite: for every beta regime and both regularizers, on both
/// factor sides, 1000 random probes show no violation of the upper bound in
/// difference form, exact tightness at the anchor, and the ratio-dependence,
/// first-order and strict-convexity properties.
#[test]
fn majorization_suite() {
    let mut rng = ChaCha8Rng::seed_from_u64(1001);
    for beta in [-0.5, 0.0, 0.5, 1.0, 1.5, 2.0, 2.5, 3.0] {
        for reg in [
            Regularizer::L1 { alpha: 0.7 },
            Regularizer::Log {
                alpha: 0.7,
                epsilon: 0.01,
            },
        ] {
            for side in [FactorSide::Activations, FactorSide::Dictionary] {
                let f = rng.random_range(2..6usize);
                let n = rng.random_range(2..6usize);
                let k = rng.random_range(1..4usize);
                let v = random_matrix(&mut rng, f, n);
                let w = random_matrix(&mut rng, f, k);
                let h = random_matrix(&mut rng, k, n);
                let ctx = match side {
                    FactorSide::Activations => {
                        AuxContext::new(side, &v, &w, &h, beta, reg, 1e-12).unwrap()
                    }
                    FactorSide::Dictionary => {
                        AuxContext::new(side, &v, &h, &w, beta, reg, 1e-12).unwrap()
                    }
                };
                let report = check_mm_properties(&ctx, 1000, rng.random()).unwrap();
                assert!(
                    report.all_ok(),
                    "beta={beta} {} {side:?}: {report:?}",
                    reg.label()
                );
            }
        }
    }
    println!(
        "PASS majorization suite: 1000 probes per (beta x regularizer x side) point, 0 violations"
    );
}

/// Closed-form updates against the brute-force argmin of the materialized
/// auxiliary bound: entrywise agreement to relative 1e-8 on 100 random
/// instances per (beta regime x regularizer x factor side).
#[test]
fn closed_form_matches_bruteforce_argmin() {
    let regimes: [&[f64]; 4] = [&[-0.5, 0.0, 0.5], &[1.0], &[1.5, 2.0], &[2.5, 3.0]];
    let mut rng = ChaCha8Rng::seed_from_u64(1002);
    let kappa = 1e-12;
    let mut instances = 0;
    for betas in regimes {
        for reg in [
            Regularizer::L1 { alpha: 0.4 },
            Regularizer::Log {
                alpha: 0.4,
                epsilon: 0.01,
            },
        ] {
            for side in [FactorSide::Activations, FactorSide::Dictionary] {
                for i in 0..100 {
                    let beta = betas[i % betas.len()];
                    let f = rng.random_range(2..6usize);
                    let n = rng.random_range(2..6usize);
                    let k = rng.random_range(1..4usize);
                    let v = random_matrix(&mut rng, f, n);
                    let w = random_matrix(&mut rng, f, k);
                    let h = random_matrix(&mut rng, k, n);
                    let vdm = DataMatrix::dense(v.clone()).unwrap();
                    let alpha = reg.alpha();
                    let (ctx, update) = match (side, reg) {
                        (FactorSide::Activations, Regularizer::L1 { .. }) => (
                            AuxContext::new(side, &v, &w, &h, beta, reg, kappa).unwrap(),
                            mm_update_h(&vdm, &w, &h, beta, alpha, kappa).unwrap(),
                        ),
                        (FactorSide::Dictionary, Regularizer::L1 { .. }) => (
                            AuxContext::new(side, &v, &h, &w, beta, reg, kappa).unwrap(),
                            mm_update_w(&vdm, &w, &h, beta, alpha, kappa).unwrap(),
                        ),
                        (FactorSide::Activations, Regularizer::Log { epsilon, .. }) => (
                            AuxContext::new(side, &v, &w, &h, beta, reg, kappa).unwrap(),
                            mm_log_update_h(&vdm, &w, &h, beta, alpha, epsilon, kappa).unwrap(),
                        ),
                        (FactorSide::Dictionary, Regularizer::Log { epsilon, .. }) => (
                            AuxContext::new(side, &v, &h, &w, beta, reg, kappa).unwrap(),
                            mm_log_update_w(&vdm, &w, &h, beta, alpha, epsilon, kappa).unwrap(),
                        ),
                    };
                    let brute = aux_argmin(&ctx).unwrap();
                    instances += 1;
                    for (idx, (a, b)) in update.iter().zip(brute.iter()).enumerate() {
                        assert!(
                            (a - b).abs() <= 1e-8 * b.abs(),
                            "beta={beta} {} {side:?} instance {i} entry {idx}: \
                             update {a} vs argmin {b}",
                            reg.label()
                        );
                    }
                }
            }
        }
    }
    println!("PASS closed-form vs brute-force argmin: {instances} instances, entrywise 1e-8");
}

/// Cross-method identities at a column-normalized dictionary: the Lagrangian
/// H update is the MM H update for beta <= 1, the heuristic H update is the
/// MM H update for beta in [1, 2], both to relative 1e-12.
#[test]
fn cross_method_identities() {
    let mut rng = ChaCha8Rng::seed_from_u64(1003);
    let mut checks = 0;
    for _ in 0..25 {
        let f = rng.random_range(2..7usize);
        let n = rng.random_range(2..7usize);
        let k = rng.random_range(1..4usize);
        let v = DataMatrix::dense(random_matrix(&mut rng, f, n)).unwrap();
        let w = normalize_cols(&random_matrix(&mut rng, f, k));
        let h = random_matrix(&mut rng, k, n);
        for beta in [-0.5, 0.0, 1.0] {
            let a = lagr_update_h(&v, &w, &h, beta, 0.7, 1e-12).unwrap();
            let b = mm_update_h(&v, &w, &h, beta, 0.7, 1e-12).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                assert!(
                    (x - y).abs() <= 1e-12 * y.abs(),
                    "lagr vs mm at beta={beta}: {x} vs {y}"
                );
            }
            checks += 1;
        }
        for beta in [1.0, 1.5, 2.0] {
            let a = heur_update_h(&v, &w, &h, beta, 0.7, 1e-12).unwrap();
            let b = mm_update_h(&v, &w, &h, beta, 0.7, 1e-12).unwrap();
            for (x, y) in a.iter().zip(b.iter()) {
                assert!(
                    (x - y).abs() <= 1e-12 * y.abs(),
                    "heur vs mm at beta={beta}: {x} vs {y}"
                );
            }
            checks += 1;
        }
    }
    println!("PASS cross-method identities: {checks} update comparisons at relative 1e-12");
}

/// Constraint maintenance: Lagrangian runs keep every dictionary column at
/// unit l1 norm within 1e-8 at every iteration, and the multiplier search
/// satisfies |phi(nu) - 1| <= 1e-10 strictly below the positivity bound on
/// 1000 randomized columns.
#[test]
fn lagrangian_constraint_maintenance() {
    for beta in [0.0, 0.5, 1.0] {
        let (v, _) = synth_instance(15, 12, 3, 77, 5.0, SynthMode::HalfNormal).unwrap();
        let mut config = SolverConfig::new(3, beta, Method::Lagrangian, Regularizer::L1 {
            alpha: 0.5,
        });
        config.max_iter = 150;
        let (_, trace) = run(&v, &config, None).unwrap();
        assert!(!trace.status.is_failed(), "beta={beta}: {:?}", trace.status);
        for record in &trace.records {
            assert!(
                record.norm_residual <= 1e-8,
                "beta={beta} iteration {}: residual {}",
                record.iteration,
                record.norm_residual
            );
        }
    }

    let mut rng = ChaCha8Rng::seed_from_u64(1005);
    for trial in 0..1000 {
        let f = rng.random_range(1..8usize);
        let beta = [-0.5, 0.0, 0.5, 1.0][trial % 4];
        let gamma = 1.0 / (2.0 - beta);
        let a: Vec<f64> = (0..f).map(|_| rng.random_range(0.01..5.0)).collect();
        let b: Vec<f64> = (0..f).map(|_| rng.random_range(0.01..5.0)).collect();
        let w: Vec<f64> = (0..f).map(|_| rng.random_range(0.01..1.0)).collect();
        let nu = solve_multiplier(&a, &b, &w, beta, 1e-10, 200, trial).unwrap();
        let bound = (0..f)
            .filter(|&i| w[i] > 0.0 && a[i] > 0.0)
            .map(|i| b[i])
            .fold(f64::INFINITY, f64::min);
        assert!(nu < bound, "trial {trial}: nu {nu} not below bound {bound}");
        let phi: f64 = (0..f)
            .filter(|&i| w[i] > 0.0 && a[i] > 0.0)
            .map(|i| w[i] * (a[i] / (b[i] - nu)).powf(gamma))
            .sum();
        assert!(
            (phi - 1.0).abs() <= 1e-10,
            "trial {trial}: |phi - 1| = {:e}",
            (phi - 1.0).abs()
        );
    }
    println!(
        "PASS constraint maintenance: residual <= 1e-8 on all Lagrangian traces; \
         1000 multiplier solves at |phi-1| <= 1e-10"
    );
}

/// Rescaling equivalence: moving the column norms of W into H changes
/// neither the product nor the objective beyond relative 1e-12.
#[test]
fn rescale_invariance() {
    let mut rng = ChaCha8Rng::seed_from_u64(1006);
    for i in 0..100 {
        let f = rng.random_range(2..7usize);
        let n = rng.random_range(2..7usize);
        let k = rng.random_range(1..4usize);
        let v = DataMatrix::dense(random_matrix(&mut rng, f, n)).unwrap();
        let pair = FactorPair {
            w: random_matrix(&mut rng, f, k),
            h: random_matrix(&mut rng, k, n),
        };
        let beta = [-0.5, 0.5, 1.0, 1.5, 2.0, 2.7][i % 6];
        let product = pair.w.dot(&pair.h);
        let objectives: Vec<f64> = [
            Regularizer::L1 { alpha: 0.7 },
            Regularizer::Log {
                alpha: 0.7,
                epsilon: 0.01,
            },
        ]
        .iter()
        .map(|reg| objective(&v, &pair.w, &pair.h, beta, reg, 1e-12).unwrap())
        .collect();
        let rescaled = rescale(pair);
        let product_after = rescaled.w.dot(&rescaled.h);
        for (a, b) in product.iter().zip(product_after.iter()) {
            assert!((a - b).abs() <= 1e-12 * b.abs(), "product drifted: {a} vs {b}");
        }
        for (j, reg) in [
            Regularizer::L1 { alpha: 0.7 },
            Regularizer::Log {
                alpha: 0.7,
                epsilon: 0.01,
            },
        ]
        .iter()
        .enumerate()
        {
            let after = objective(&v, &rescaled.w, &rescaled.h, beta, reg, 1e-12).unwrap();
            assert!(
                (objectives[j] - after).abs() <= 1e-12 * after.abs().max(1.0),
                "objective drifted under {}: {} vs {after}",
                reg.label(),
                objectives[j]
            );
        }
    }
    println!("PASS rescale invariance: 100 random pairs at relative 1e-12");
}

/// First-order stationarity at convergence: for 20 small problems per method
/// family, finite-difference gradient components at clearly interior
/// coordinates of the converged iterates stay within 1e-3 * (1 + |J|).
#[test]
fn kkt_residual_at_convergence() {
    let families: [(Method, Regularizer, &[f64]); 5] = [
        (Method::Mm, Regularizer::L1 { alpha: 0.1 }, &[0.5, 1.0, 1.5, 2.5]),
        (
            Method::Mm,
            Regularizer::Log {
                alpha: 0.1,
                epsilon: 0.01,
            },
            &[0.5, 1.0, 1.5, 2.5],
        ),
        (
            Method::Heuristic,
            Regularizer::L1 { alpha: 0.1 },
            &[0.5, 1.0, 1.5, 2.5],
        ),
        (
            Method::Heuristic,
            Regularizer::Log {
                alpha: 0.1,
                epsilon: 0.01,
            },
            &[0.5, 1.0, 1.5, 2.5],
        ),
        (
            Method::Lagrangian,
            Regularizer::L1 { alpha: 0.1 },
            &[0.0, 0.5, 1.0],
        ),
    ];
    let mut rng = ChaCha8Rng::seed_from_u64(1007);
    for (method, reg, betas) in families {
        let mut checked = 0usize;
        for i in 0..20 {
            let beta = betas[i % betas.len()];
            let v = DataMatrix::dense(random_matrix(&mut rng, 6, 5)).unwrap();
            let mut config = SolverConfig::new(2, beta, method, reg);
            config.delta = 1e-11;
            config.max_iter = 50_000;
            config.seed = rng.random();
            let (pair, trace) = run(&v, &config, None).unwrap();
            assert!(
                !trace.status.is_failed(),
                "{method:?} {} beta={beta}: {:?}",
                reg.label(),
                trace.status
            );
            let j = trace.final_objective();
            let bound = 1e-3 * (1.0 + j.abs());
            // activation-side components
            let h_scale = pair.h.iter().cloned().fold(0.0f64, f64::max);
            for k in 0..pair.h.nrows() {
                for n in 0..pair.h.ncols() {
                    let x = pair.h[[k, n]];
                    if x <= 1e-4 * h_scale {
                        continue;
                    }
                    let step = 1e-6 * x;
                    let mut hp = pair.h.clone();
                    hp[[k, n]] += step;
                    let mut hm = pair.h.clone();
                    hm[[k, n]] -= step;
                    let jp = objective(&v, &pair.w, &hp, beta, &reg, config.kappa).unwrap();
                    let jm = objective(&v, &pair.w, &hm, beta, &reg, config.kappa).unwrap();
                    let grad = (jp - jm) / (2.0 * step);
                    checked += 1;
                    assert!(
                        grad.abs() <= bound,
                        "{method:?} {} beta={beta}: H gradient {grad} at ({k},{n}), bound {bound}",
                        reg.label()
                    );
                }
            }
            // dictionary-side components
            let w_scale = pair.w.iter().cloned().fold(0.0f64, f64::max);
            for f in 0..pair.w.nrows() {
                for k in 0..pair.w.ncols() {
                    let x = pair.w[[f, k]];
                    if x <= 1e-4 * w_scale {
                        continue;
                    }
                    let step = 1e-6 * x;
                    let mut wp = pair.w.clone();
                    wp[[f, k]] += step;
                    let mut wm = pair.w.clone();
                    wm[[f, k]] -= step;
                    let jp = objective(&v, &wp, &pair.h, beta, &reg, config.kappa).unwrap();
                    let jm = objective(&v, &wm, &pair.h, beta, &reg, config.kappa).unwrap();
                    let grad = (jp - jm) / (2.0 * step);
                    checked += 1;
                    assert!(
                        grad.abs() <= bound,
                        "{method:?} {} beta={beta}: W gradient {grad} at ({f},{k}), bound {bound}",
                        reg.label()
                    );
                }
            }
        }
        assert!(checked > 100, "{method:?}: too few interior coordinates");
    }
    println!("PASS stationarity at convergence: 20 problems per method family");
}

/// External-dataset benchmark: only runs when a face-image matrix is supplied
/// through SNMF_DATA_OLIVETTI (4096x400 dense CSV). With K = 10, beta = 1,
/// alpha = 0.01 and 10 seeds the mean normalized objective must come within
/// 2% of the 3.16 reference value for this benchmark; without the dataset
/// the check is vacuously satisfied.
#[test]
fn external_dataset_benchmark_when_supplied() {
    let Ok(path) = std::env::var("SNMF_DATA_OLIVETTI") else {
        println!(
            "PASS external dataset benchmark: SNMF_DATA_OLIVETTI not set, vacuously satisfied"
        );
        return;
    };
    let v = snmf_core::io::load_matrix(std::path::Path::new(&path), snmf_core::io::MatrixFormat::DenseCsv)
        .expect("loading the face-image matrix");
    let config = SolverConfig::new(10, 1.0, Method::Mm, Regularizer::L1 { alpha: 0.01 });
    let reports = benchmark(&v, &[config], 10, 1);
    let summary = &summarize(&reports)[0];
    let reference = 3.16;
    let rel = (summary.objective_norm_mean - reference).abs() / reference;
    assert!(
        rel <= 0.02,
        "mean J/FN {} deviates {rel:.3} from {reference}",
        summary.objective_norm_mean
    );
    println!(
        "PASS external dataset benchmark: mean J/FN {:.4} within 2% of {reference}",
        summary.objective_norm_mean
    );
}

/// Iteration economy on the synthetic protocol: mean iteration counts per
/// method are reported, and both methods are required to converge before the
/// 5000-iteration cap in at least 90% of 50 seeds.
///
/// KNOWN RED: the MM half holds (50/50 seeds converge), but the heuristic
/// has no descent guarantee and in this beta = -0.5 regime it oscillates
/// persistently: 0/50 seeds meet the relative-change tolerance within the
/// cap, on every data draw tried, and an independent reimplementation of the
/// heuristic reproduces the oscillation sweep for sweep. The 90% requirement
/// on the heuristic is therefore unattainable on this setup and the
/// assertion below fails by design rather than being weakened.
#[test]
fn iteration_economy_on_synthetic() {
    let v = fig1_data();
    let mut stats = Vec::new();
    for method in [Method::Mm, Method::Heuristic] {
        let mut converged = 0usize;
        let mut total_iterations = 0usize;
        for seed in 0..50 {
            let mut config = fig1_config(method);
            config.seed = seed;
            let (_, trace) = run(&v, &config, None).unwrap();
            assert!(!trace.status.is_failed());
            if trace.status == RunStatus::Converged {
                converged += 1;
            }
            total_iterations += trace.iterations();
        }
        stats.push((method, total_iterations as f64 / 50.0, converged));
    }
    let report: Vec<String> = stats
        .iter()
        .map(|(m, mean, conv)| format!("{m:?}: mean {mean:.0} iterations, {conv}/50 converged"))
        .collect();
    println!("iteration economy report: {}", report.join("; "));
    for (method, _, converged) in &stats {
        assert!(
            *converged >= 45,
            "{method:?}: only {converged}/50 seeds converged before the cap \
             (full report: {})",
            report.join("; ")
        );
    }
    println!("PASS iteration economy");
}

/// The initialization is reproducible and nonnegative, and MM finalization
/// returns unit-norm dictionary columns.
#[test]
fn finalization_returns_unit_columns() {
    let v = fig1_data();
    let mut config = fig1_config(Method::Mm);
    config.max_iter = 40;
    config.delta = 1e-12;
    let (pair, _) = run(&v, &config, None).unwrap();
    for &s in col_sums(&pair.w).iter() {
        assert!((s - 1.0).abs() <= 1e-10, "column norm {s}");
    }
    let again = init_half_normal(50, 40, 3, config.seed, config.init_sigma);
    let first = init_half_normal(50, 40, 3, config.seed, config.init_sigma);
    assert_eq!(again.w, first.w);
    println!("PASS finalization: unit dictionary columns after rescale");
}
