use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::json;

use pce_cli::{
    run_experiment, run_sweep, write_runs_csv, write_sweep_csv, Epsilon, ExperimentConfig, Method, Source, SweepAxis,
};
use pce_core::benchmark::{fit_benchmark_sparse_pce, BenchmarkConfig};
use pce_core::fss::{fit_fss_pce, FssConfig, ScoreTarget, Threshold};
use pce_core::models::{monte_carlo_reference, Example};
use pce_core::rng::stream;
use pce_core::Dataset;

#[derive(Parser)]
#[command(name = "pce", version, about = "Sparse polynomial chaos expansions for dependent inputs")]
struct Cli {
    /// Worker threads (PCE_JOBS overrides).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Repeated fits on one example, with per-run and aggregate metrics.
    Run(RunArgs),
    /// One experiment per polynomial order or sample size.
    Sweep(SweepArgs),
    /// Write a sample of an example as CSV.
    Sample(SampleArgs),
    /// Fit a model to a CSV file.
    Fit(FitArgs),
    /// Monte Carlo estimate of an example's output standard deviation.
    Reference(ReferenceArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Fss,
    Benchmark,
    Both,
}

impl MethodArg {
    fn methods(self) -> Vec<Method> {
        match self {
            Self::Fss => vec![Method::Fss],
            Self::Benchmark => vec![Method::Benchmark],
            Self::Both => vec![Method::Fss, Method::Benchmark],
        }
    }
}

/// What FSS correlates candidate monomials against.
#[derive(Clone, Copy, ValueEnum)]
enum ScoreArg {
    /// The output minus its fit on the members selected so far.
    Residual,
    /// The output itself.
    Raw,
}

impl From<ScoreArg> for ScoreTarget {
    fn from(s: ScoreArg) -> Self {
        match s {
            ScoreArg::Residual => Self::Residual,
            ScoreArg::Raw => Self::Raw,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct ExperimentArgs {
    /// ishigami, example2, truss, hiv or csv:<path>.
    #[arg(long)]
    example: Source,
    #[arg(long, value_enum, default_value = "fss")]
    method: MethodArg,
    #[arg(long, default_value_t = 2)]
    order: u32,
    #[arg(long, default_value_t = 50)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Correlation threshold in (0, 1), or "auto" for cross-validation.
    #[arg(long, default_value = "auto")]
    epsilon: Epsilon,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    #[arg(long, value_enum, default_value = "residual")]
    score: ScoreArg,
    /// Record wall times (reports are then no longer reproducible byte for byte).
    #[arg(long)]
    timing: bool,
}

impl ExperimentArgs {
    fn config(&self, samples: usize) -> ExperimentConfig {
        ExperimentConfig {
            runs: self.runs,
            seed: self.seed,
            epsilon: self.epsilon,
            cv_folds: self.cv_folds,
            score: self.score.into(),
            timing: self.timing,
            ..ExperimentConfig::new(self.example.clone(), Method::Fss, self.order, samples)
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    #[arg(long)]
    samples: usize,
    #[arg(long, value_enum, default_value = "json")]
    format: Format,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    common: ExperimentArgs,
    /// Comma-separated polynomial orders (needs --samples).
    #[arg(long, value_delimiter = ',', conflicts_with = "sample_sizes")]
    orders: Vec<u32>,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    sample_sizes: Vec<usize>,
    /// Sample size when sweeping over orders.
    #[arg(long)]
    samples: Option<usize>,
    /// Tidy CSV output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional JSON file with every report.
    #[arg(long)]
    reports: Option<PathBuf>,
}

#[derive(Args)]
struct SampleArgs {
    #[arg(long)]
    example: String,
    #[arg(long)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FitMethod {
    Fss,
    Benchmark,
}

#[derive(Args)]
struct FitArgs {
    /// CSV with header x1..xn,y.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value = "fss")]
    method: FitMethod,
    #[arg(long, default_value_t = 2)]
    order: u32,
    #[arg(long, default_value = "auto")]
    epsilon: Epsilon,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    #[arg(long, value_enum, default_value = "residual")]
    score: ScoreArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Model JSON output (stdout when absent).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Selection trace CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
}

#[derive(Args)]
struct ReferenceArgs {
    #[arg(long)]
    example: String,
    #[arg(long, default_value_t = 100)]
    runs: usize,
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(
            File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        )),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn example(name: &str) -> Result<Example> {
    Example::from_name(name).with_context(|| format!("unknown example '{name}'"))
}

fn configure_threads(jobs: Option<usize>) -> Result<()> {
    let env = std::env::var("PCE_JOBS").ok();
    let jobs = match env {
        Some(v) => Some(v.parse::<usize>().with_context(|| format!("PCE_JOBS must be a positive integer, got '{v}'"))?),
        None => jobs,
    };
    if let Some(n) = jobs {
        if n == 0 {
            bail!("jobs must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn run(args: RunArgs) -> Result<()> {
    let base = args.common.config(args.samples);
    let methods = args.common.method.methods();
    let reports = methods
        .iter()
        .map(|&method| run_experiment(&ExperimentConfig { method, ..base.clone() }))
        .collect::<pce_core::Result<Vec<_>>>()?;
    let mut out = output(args.out.as_deref())?;
    match args.format {
        Format::Json => {
            if reports.len() == 1 {
                serde_json::to_writer_pretty(&mut out, &reports[0])?;
            } else {
                let by_method: serde_json::Map<String, serde_json::Value> = reports
                    .iter()
                    .map(|r| Ok((r.config.method.name().to_string(), serde_json::to_value(r)?)))
                    .collect::<Result<_>>()?;
                serde_json::to_writer_pretty(&mut out, &by_method)?;
            }
            writeln!(out)?;
        }
        Format::Csv => {
            write_runs_csv(&reports, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn sweep(args: SweepArgs) -> Result<()> {
    let (axis, samples) = if !args.orders.is_empty() {
        let m = args.samples.context("--samples is required with --orders")?;
        (SweepAxis::Order(args.orders.clone()), m)
    } else if !args.sample_sizes.is_empty() {
        (SweepAxis::Samples(args.sample_sizes.clone()), args.sample_sizes[0])
    } else {
        bail!("give --orders or --sample-sizes");
    };
    let base = args.common.config(samples);
    let points = run_sweep(&base, &args.common.method.methods(), &axis)?;
    let mut out = output(args.out.as_deref())?;
    write_sweep_csv(&points, &mut out)?;
    out.flush()?;
    if let Some(path) = &args.reports {
        let reports: Vec<_> = points.iter().map(|p| &p.report).collect();
        let mut w = output(Some(path))?;
        serde_json::to_writer_pretty(&mut w, &reports)?;
        writeln!(w)?;
        w.flush()?;
    }
    Ok(())
}

fn sample(args: SampleArgs) -> Result<()> {
    let data = example(&args.example)?.sample(args.samples, &mut stream(args.seed, 0))?;
    let mut out = output(args.out.as_deref())?;
    data.write_csv(&mut out)?;
    out.flush()?;
    Ok(())
}

fn fit(args: FitArgs) -> Result<()> {
    let data = Dataset::read_csv(File::open(&args.data).with_context(|| format!("cannot open {}", args.data.display()))?)
        .with_context(|| format!("cannot read {}", args.data.display()))?;
    let (model, warnings, epsilon) = match args.method {
        FitMethod::Fss => {
            let mut cfg = FssConfig::new(args.order).with_seed(args.seed);
            cfg.cv_folds = args.cv_folds;
            cfg.score_target = args.score.into();
            cfg.threshold = match args.epsilon {
                Epsilon::Auto => Threshold::Auto,
                Epsilon::Fixed(e) => Threshold::Fixed(e),
            };
            let fit = fit_fss_pce(&data, &cfg)?;
            if let Some(path) = &args.trace {
                fit.trace.write_csv(output(Some(path))?)?;
            }
            (fit.model, fit.trace.warnings, Some(fit.epsilon))
        }
        FitMethod::Benchmark => {
            let mut cfg = BenchmarkConfig::new(args.order).with_seed(args.seed);
            cfg.cv_folds = args.cv_folds;
            let fit = fit_benchmark_sparse_pce(&data, &cfg)?;
            if let Some(path) = &args.trace {
                fit.trace.write_csv(output(Some(path))?)?;
            }
            (fit.model, fit.trace.warnings, None)
        }
    };
    let mut out = output(args.out.as_deref())?;
    out.write_all(model.to_json()?.as_bytes())?;
    writeln!(out)?;
    out.flush()?;
    let (mean, variance) = model.moments();
    let summary = json!({
        "terms": model.terms().len(),
        "mean": mean,
        "sd": variance.sqrt(),
        "epsilon": epsilon,
        "warnings": warnings,
    });
    eprintln!("{summary}");
    Ok(())
}

fn reference(args: ReferenceArgs) -> Result<()> {
    let e = example(&args.example)?;
    let agg = monte_carlo_reference(e, args.runs, args.samples, args.seed)?;
    let report = json!({
        "example": e.name(),
        "runs": args.runs,
        "samples": args.samples,
        "seed": args.seed,
        "sd_mean": agg.mean(),
        "sd_se": agg.standard_error(),
    });
    println!("{}", serde_json::to_string_pretty(&report)?);
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads(cli.jobs)?;
    match cli.command {
        Command::Run(a) => run(a),
        Command::Sweep(a) => sweep(a),
        Command::Sample(a) => sample(a),
        Command::Fit(a) => fit(a),
        Command::Reference(a) => reference(a),
    }
}
