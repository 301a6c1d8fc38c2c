//! Matrix ingestion (dense CSV and sparse coordinate text), synthetic
//! instance generation, and report/trace serialization.
//!
//! Dense CSV is one row per line, comma-separated decimals. The sparse
//! coordinate format starts with a header line `rows cols nnz` followed by
//! one `i j v` triplet per line with 1-based indices. Values are validated
//! nonnegative on load. Decimals are written with shortest-round-trip
//! formatting.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_distr::Distribution;

use crate::error::{Error, Result};
use crate::matrix::{DataMatrix, DenseMatrix};
use crate::solver::{summarize, FactorPair, IterationTrace, RunReport};

/// On-disk matrix layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    DenseCsv,
    SparseCoord,
}

/// Parse a matrix file. Errors carry 1-based line numbers.
pub fn load_matrix(path: &Path, format: MatrixFormat) -> Result<DataMatrix> {
    let text = fs::read_to_string(path)?;
    match format {
        MatrixFormat::DenseCsv => parse_dense_csv(&text),
        MatrixFormat::SparseCoord => parse_sparse_coord(&text),
    }
}

fn parse_field(token: &str, line: usize) -> Result<f64> {
    token.trim().parse::<f64>().map_err(|_| Error::Parse {
        line,
        message: format!("expected a decimal number, got {token:?}"),
    })
}

pub fn parse_dense_csv(text: &str) -> Result<DataMatrix> {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let row: Vec<f64> = line
            .split(',')
            .map(|tok| parse_field(tok, lineno))
            .collect::<Result<_>>()?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse {
                    line: lineno,
                    message: format!(
                        "row has {} columns, expected {}",
                        row.len(),
                        first.len()
                    ),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "empty matrix file".into(),
        });
    }
    let (r, c) = (rows.len(), rows[0].len());
    let flat: Vec<f64> = rows.into_iter().flatten().collect();
    let dense = DenseMatrix::from_shape_vec((r, c), flat).expect("shape checked above");
    DataMatrix::dense(dense)
}

pub fn parse_sparse_coord(text: &str) -> Result<DataMatrix> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (header_idx, header) = lines.next().ok_or_else(|| Error::Parse {
        line: 1,
        message: "empty matrix file".into(),
    })?;
    let fields: Vec<&str> = header.split_whitespace().collect();
    if fields.len() != 3 {
        return Err(Error::Parse {
            line: header_idx + 1,
            message: format!("expected header `rows cols nnz`, got {header:?}"),
        });
    }
    let parse_count = |tok: &str, line: usize| -> Result<usize> {
        tok.parse::<usize>().map_err(|_| Error::Parse {
            line,
            message: format!("expected a nonnegative integer, got {tok:?}"),
        })
    };
    let rows = parse_count(fields[0], header_idx + 1)?;
    let cols = parse_count(fields[1], header_idx + 1)?;
    let nnz = parse_count(fields[2], header_idx + 1)?;
    let mut triplets = Vec::with_capacity(nnz);
    for (idx, line) in lines {
        let lineno = idx + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                message: format!("expected `i j v`, got {line:?}"),
            });
        }
        let i = parse_count(fields[0], lineno)?;
        let j = parse_count(fields[1], lineno)?;
        let v = parse_field(fields[2], lineno)?;
        if i == 0 || j == 0 {
            return Err(Error::Parse {
                line: lineno,
                message: "coordinate indices are 1-based".into(),
            });
        }
        triplets.push((i - 1, j - 1, v));
    }
    if triplets.len() != nnz {
        return Err(Error::Parse {
            line: header_idx + 1,
            message: format!(
                "header declares {nnz} entries, file contains {}",
                triplets.len()
            ),
        });
    }
    DataMatrix::sparse(rows, cols, triplets)
}

/// Write a dense matrix as CSV with shortest-round-trip decimals.
pub fn write_dense_csv(m: &DenseMatrix, path: &Path) -> Result<()> {
    let mut out = String::new();
    for row in m.outer_iter() {
        let line: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    fs::write(path, out)?;
    Ok(())
}

/// How a synthetic instance is produced.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SynthMode {
    /// Draw V itself from the half-normal distribution.
    HalfNormal,
    /// Draw half-normal factors and set V to their product, optionally with
    /// additive half-normal noise of the given standard deviation.
    Product { noise: Option<f64> },
}

/// Generate a synthetic instance deterministically per seed: the data matrix
/// plus a half-normal factor pair of rank `k_true` (the generating factors in
/// product mode, an arbitrary reference pair otherwise).
pub fn synth_instance(
    f: usize,
    n: usize,
    k_true: usize,
    seed: u64,
    sigma: f64,
    mode: SynthMode,
) -> Result<(DataMatrix, FactorPair)> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let normal = rand_distr::Normal::new(0.0, sigma).map_err(|_| Error::UnsupportedConfig {
        reason: format!("invalid half-normal sigma {sigma}"),
    })?;
    let mut draw = move || normal.sample(&mut rng).abs();
    match mode {
        SynthMode::HalfNormal => {
            let v = DenseMatrix::from_shape_fn((f, n), |_| draw());
            let w = DenseMatrix::from_shape_fn((f, k_true), |_| draw());
            let h = DenseMatrix::from_shape_fn((k_true, n), |_| draw());
            Ok((DataMatrix::dense(v)?, FactorPair { w, h }))
        }
        SynthMode::Product { noise } => {
            let w = DenseMatrix::from_shape_fn((f, k_true), |_| draw());
            let h = DenseMatrix::from_shape_fn((k_true, n), |_| draw());
            let mut v = w.dot(&h);
            if let Some(noise_sigma) = noise {
                let noise_normal =
                    rand_distr::Normal::new(0.0, noise_sigma).map_err(|_| {
                        Error::UnsupportedConfig {
                            reason: format!("invalid noise sigma {noise_sigma}"),
                        }
                    })?;
                let mut rng2 = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
                v.mapv_inplace(|x| x + noise_normal.sample(&mut rng2).abs());
            }
            Ok((DataMatrix::dense(v)?, FactorPair { w, h }))
        }
    }
}

/// Report layouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportLayout {
    Csv,
    Json,
}

pub fn report_to_csv_string(reports: &[RunReport]) -> String {
    let mut out = String::from(
        "method,regularizer,beta,alpha,seed,objective_norm,cpu_seconds,iterations,status\n",
    );
    for r in reports {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.method,
            r.regularizer,
            r.beta,
            r.alpha,
            r.seed,
            r.objective_norm,
            r.cpu_seconds,
            r.iterations,
            r.status.replace(',', ";")
        );
    }
    if !reports.is_empty() {
        out.push_str(
            "# summary,method,regularizer,beta,alpha,runs,failed,objective_norm_mean,objective_norm_std,cpu_seconds_mean,cpu_seconds_std,iterations_mean,iterations_std\n",
        );
        for s in summarize(reports) {
            let _ = writeln!(
                out,
                "# summary,{},{},{},{},{},{},{},{},{},{},{},{}",
                s.method,
                s.regularizer,
                s.beta,
                s.alpha,
                s.runs,
                s.failed,
                s.objective_norm_mean,
                s.objective_norm_std,
                s.cpu_seconds_mean,
                s.cpu_seconds_std,
                s.iterations_mean,
                s.iterations_std
            );
        }
    }
    out
}

/// Write per-run rows plus a per-configuration mean/std summary block.
pub fn write_report(reports: &[RunReport], path: &Path, layout: ReportLayout) -> Result<()> {
    match layout {
        ReportLayout::Csv => {
            fs::write(path, report_to_csv_string(reports))?;
        }
        ReportLayout::Json => {
            let doc = serde_json::json!({
                "runs": reports,
                "summary": summarize(reports),
            });
            fs::write(path, serde_json::to_string_pretty(&doc).expect("serializable") + "\n")?;
        }
    }
    Ok(())
}

pub fn trace_to_csv_string(trace: &IterationTrace) -> String {
    let mut out = String::from("iteration,objective,cpu_seconds,norm_residual\n");
    for r in &trace.records {
        let _ = writeln!(
            out,
            "{},{},{},{}",
            r.iteration, r.objective, r.cpu_seconds, r.norm_residual
        );
    }
    out
}

/// Write the per-iteration trace, iteration 0 (the initial state) included.
pub fn write_trace(trace: &IterationTrace, path: &Path) -> Result<()> {
    fs::write(path, trace_to_csv_string(trace))?;
    Ok(())
}
