//! Command-line front end: single factorization runs, multi-seed benchmarks,
//! synthetic-instance generation, and the verification suites.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use snmf_core::io::{
    self, load_matrix, write_dense_csv, write_report, write_trace, MatrixFormat, ReportLayout,
    SynthMode,
};
use snmf_core::solver::{
    benchmark, run, summarize, FactorPair, Method, RunStatus, SolverConfig,
};
use snmf_core::Regularizer;

mod verify;

#[derive(Parser)]
#[command(
    name = "snmf",
    about = "Sparse nonnegative matrix factorization with the beta-divergence",
    long_about = "Factorizes a nonnegative matrix V into W H with a sparsity penalty (l1 or log) \
                  on the activations H and unit l1-norm dictionary columns. Methods: monotone \
                  majorization-minimization updates (any beta), the gradient-split heuristic, and \
                  Lagrangian updates with a multiplier search (l1, beta <= 1)."
)]
struct Cli {
    /// Stream per-iteration progress to stderr
    #[arg(long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one factorization and write the factors
    Factorize(FactorizeArgs),
    /// Run every requested method from many seeded initializations
    Benchmark(BenchmarkArgs),
    /// Run randomized verification suites and report violations
    Verify(VerifyArgs),
    /// Generate a synthetic nonnegative matrix file
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    /// One row per line, comma-separated decimals
    DenseCsv,
    /// Header `rows cols nnz`, then 1-based `i j v` triplets
    SparseCoord,
}

impl From<FormatArg> for MatrixFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::DenseCsv => MatrixFormat::DenseCsv,
            FormatArg::SparseCoord => MatrixFormat::SparseCoord,
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum RegArg {
    L1,
    Log,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Majorization-minimization multiplicative updates
    Mm,
    /// Gradient-split heuristic with renormalization
    Heur,
    /// Lagrangian updates with multiplier search
    Lagr,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mm => Method::Mm,
            MethodArg::Heur => Method::Heuristic,
            MethodArg::Lagr => Method::Lagrangian,
        }
    }
}

/// Flags shared by factorize and benchmark, mapping onto the solver
/// configuration.
#[derive(Args)]
struct ProblemArgs {
    /// Input matrix path
    #[arg(long)]
    input: PathBuf,

    #[arg(long, value_enum, default_value = "dense-csv")]
    format: FormatArg,

    /// Inner rank K
    #[arg(long)]
    k: usize,

    /// Shape parameter of the beta-divergence
    #[arg(long, allow_negative_numbers = true)]
    beta: f64,

    /// Regularization weight
    #[arg(long)]
    alpha: f64,

    /// Sparsity penalty on the activations
    #[arg(long, value_enum, default_value = "l1")]
    reg: RegArg,

    /// Relative-change stopping tolerance
    #[arg(long, default_value_t = 1e-5)]
    tol: f64,

    #[arg(long, default_value_t = 5000)]
    max_iter: usize,

    /// Log-regularizer offset
    #[arg(long, default_value_t = 0.01)]
    epsilon: f64,

    /// Stabilization constant added to V and WH
    #[arg(long, default_value_t = 1e-12)]
    kappa: f64,

    /// Initialization seed
    #[arg(long, default_value_t = 0)]
    seed: u64,

    /// Standard deviation of the half-normal initialization
    #[arg(long, default_value_t = 5.0)]
    sigma: f64,
}

impl ProblemArgs {
    fn config(&self, method: Method) -> SolverConfig {
        let regularizer = match self.reg {
            RegArg::L1 => Regularizer::L1 { alpha: self.alpha },
            RegArg::Log => Regularizer::Log {
                alpha: self.alpha,
                epsilon: self.epsilon,
            },
        };
        let mut config = SolverConfig::new(self.k, self.beta, method, regularizer);
        config.kappa = self.kappa;
        config.delta = self.tol;
        config.max_iter = self.max_iter;
        config.seed = self.seed;
        config.init_sigma = self.sigma;
        config
    }
}

#[derive(Args)]
struct FactorizeArgs {
    #[command(flatten)]
    problem: ProblemArgs,

    #[arg(long, value_enum)]
    method: MethodArg,

    /// Optional initial dictionary (dense CSV); requires --init-h
    #[arg(long, requires = "init_h")]
    init_w: Option<PathBuf>,

    /// Optional initial activations (dense CSV); requires --init-w
    #[arg(long, requires = "init_w")]
    init_h: Option<PathBuf>,

    /// Output path for the dictionary (dense CSV)
    #[arg(long)]
    out_w: PathBuf,

    /// Output path for the activations (dense CSV)
    #[arg(long)]
    out_h: PathBuf,

    /// Optional per-iteration trace CSV
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct BenchmarkArgs {
    #[command(flatten)]
    problem: ProblemArgs,

    /// Comma-separated list of methods to compare
    #[arg(long, value_delimiter = ',', value_enum, default_value = "mm")]
    methods: Vec<MethodArg>,

    /// Number of seeded initializations per method
    #[arg(long, default_value_t = 1)]
    seeds: usize,

    /// Report output path
    #[arg(long)]
    report: PathBuf,

    #[arg(long, value_enum, default_value = "csv")]
    layout: LayoutArg,

    /// Concurrent runs; 1 keeps the report bitwise reproducible
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LayoutArg {
    Csv,
    Json,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    suite: verify::Suite,

    /// Randomized checks per configuration point
    #[arg(long, default_value_t = 100)]
    trials: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    rows: usize,

    #[arg(long)]
    cols: usize,

    /// Generating rank for product mode
    #[arg(long, default_value_t = 3)]
    k_true: usize,

    #[arg(long, default_value_t = 0)]
    seed: u64,

    #[arg(long, default_value_t = 5.0)]
    sigma: f64,

    /// half-normal: draw V directly; product: V = W H from half-normal factors
    #[arg(long, value_enum, default_value = "half-normal")]
    mode: SynthModeArg,

    /// Additive half-normal noise level for product mode
    #[arg(long)]
    noise: Option<f64>,

    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SynthModeArg {
    HalfNormal,
    Product,
}

fn load_init(args: &FactorizeArgs) -> anyhow::Result<Option<FactorPair>> {
    match (&args.init_w, &args.init_h) {
        (Some(wp), Some(hp)) => {
            let w = load_matrix(wp, MatrixFormat::DenseCsv)
                .with_context(|| format!("loading {}", wp.display()))?;
            let h = load_matrix(hp, MatrixFormat::DenseCsv)
                .with_context(|| format!("loading {}", hp.display()))?;
            Ok(Some(FactorPair {
                w: w.to_dense().into_owned(),
                h: h.to_dense().into_owned(),
            }))
        }
        _ => Ok(None),
    }
}

fn cmd_factorize(args: &FactorizeArgs) -> anyhow::Result<ExitCode> {
    let v = load_matrix(&args.problem.input, args.problem.format.into())
        .with_context(|| format!("loading {}", args.problem.input.display()))?;
    let config = args.problem.config(args.method.into());
    let init = load_init(args)?;
    let (pair, trace) = run(&v, &config, init)?;
    write_dense_csv(&pair.w, &args.out_w)
        .with_context(|| format!("writing {}", args.out_w.display()))?;
    write_dense_csv(&pair.h, &args.out_h)
        .with_context(|| format!("writing {}", args.out_h.display()))?;
    if let Some(trace_path) = &args.trace {
        write_trace(&trace, trace_path)
            .with_context(|| format!("writing {}", trace_path.display()))?;
    }
    let scale = (v.rows() * v.cols()) as f64;
    eprintln!(
        "{}: objective/FN = {:.6e} after {} iterations ({:.2}s cpu)",
        trace.status.label(),
        trace.final_objective() / scale,
        trace.iterations(),
        trace.records.last().map_or(0.0, |r| r.cpu_seconds),
    );
    match trace.status {
        RunStatus::Converged => Ok(ExitCode::SUCCESS),
        RunStatus::MaxIterReached => {
            eprintln!("warning: iteration cap reached, returning the current factors");
            Ok(ExitCode::SUCCESS)
        }
        RunStatus::Failed(_) => Ok(ExitCode::FAILURE),
    }
}

fn cmd_benchmark(args: &BenchmarkArgs) -> anyhow::Result<ExitCode> {
    if args.methods.is_empty() {
        bail!("at least one method is required");
    }
    let v = load_matrix(&args.problem.input, args.problem.format.into())
        .with_context(|| format!("loading {}", args.problem.input.display()))?;
    let configs: Vec<SolverConfig> = args
        .methods
        .iter()
        .map(|&m| args.problem.config(m.into()))
        .collect();
    for config in &configs {
        config.validate()?;
    }
    let reports = benchmark(&v, &configs, args.seeds.max(1), args.jobs.max(1));
    let layout = match args.layout {
        LayoutArg::Csv => ReportLayout::Csv,
        LayoutArg::Json => ReportLayout::Json,
    };
    write_report(&reports, &args.report, layout)
        .with_context(|| format!("writing {}", args.report.display()))?;
    for s in summarize(&reports) {
        eprintln!(
            "{} ({}, beta={}, alpha={}): objective/FN {:.4e} (±{:.1e}), {:.2}s cpu (±{:.1e}), {:.0} iterations, {}/{} failed",
            s.method,
            s.regularizer,
            s.beta,
            s.alpha,
            s.objective_norm_mean,
            s.objective_norm_std,
            s.cpu_seconds_mean,
            s.cpu_seconds_std,
            s.iterations_mean,
            s.failed,
            s.runs,
        );
    }
    if reports.iter().any(|r| r.status.starts_with("failed")) {
        eprintln!("warning: some runs failed; see the report rows");
        Ok(ExitCode::FAILURE)
    } else {
        Ok(ExitCode::SUCCESS)
    }
}

fn cmd_synth(args: &SynthArgs) -> anyhow::Result<ExitCode> {
    let mode = match args.mode {
        SynthModeArg::HalfNormal => SynthMode::HalfNormal,
        SynthModeArg::Product => SynthMode::Product { noise: args.noise },
    };
    let (v, _) = io::synth_instance(args.rows, args.cols, args.k_true, args.seed, args.sigma, mode)?;
    write_dense_csv(&v.to_dense(), &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    eprintln!(
        "wrote a {}x{} synthetic matrix to {}",
        args.rows,
        args.cols,
        args.out.display()
    );
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(
        if cli.verbose { "debug" } else { "warn" },
    ))
    .format_timestamp(None)
    .init();

    let outcome = match &cli.command {
        Command::Factorize(args) => cmd_factorize(args),
        Command::Benchmark(args) => cmd_benchmark(args),
        Command::Verify(args) => verify::run_suite(args.suite, args.trials, args.seed),
        Command::Synth(args) => cmd_synth(args),
    };
    match outcome {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
