//! Experiment orchestration behind the `pce` binary: repeated fits on fresh
//! samples, per-run metrics, aggregation and sweeps.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::time::Instant;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use pce_core::benchmark::{fit_benchmark_sparse_pce, BenchmarkConfig};
use pce_core::fss::{fit_fss_pce, FssConfig, ScoreTarget, Threshold};
use pce_core::metrics::{kl_divergence_knn, relative_error, summarize_runs};
use pce_core::models::Example;
use pce_core::rng::{run_seed, splitmix64, stream};
use pce_core::{Dataset, PceError, PceModel, Result};

/// Size of the fresh evaluation samples used for the KL divergence.
pub const EVALUATION_SAMPLES: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum Source {
    Example(Example),
    /// Observations read from a CSV file; runs draw subsets of its rows.
    Csv(PathBuf),
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if let Some(path) = s.strip_prefix("csv:") {
            return Ok(Self::Csv(PathBuf::from(path)));
        }
        Example::from_name(s)
            .map(Self::Example)
            .ok_or_else(|| format!("unknown example '{s}' (ishigami, example2, truss, hiv or csv:<path>)"))
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Example(e) => f.write_str(e.name()),
            Self::Csv(p) => write!(f, "csv:{}", p.display()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Fss,
    Benchmark,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fss => "fss",
            Self::Benchmark => "benchmark",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Epsilon {
    Auto,
    Fixed(f64),
}

impl FromStr for Epsilon {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "auto" {
            return Ok(Self::Auto);
        }
        let v: f64 = s.parse().map_err(|_| format!("epsilon must be 'auto' or a number, got '{s}'"))?;
        if !(v > 0.0 && v < 1.0) {
            return Err(format!("epsilon must lie in (0, 1), got {v}"));
        }
        Ok(Self::Fixed(v))
    }
}

impl Serialize for Epsilon {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Self::Auto => s.serialize_str("auto"),
            Self::Fixed(v) => s.serialize_f64(*v),
        }
    }
}

fn serialize_display<T: fmt::Display, S: Serializer>(v: &T, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_str(v)
}

/// Non-finite values become the strings "inf", "-inf" and "nan".
fn serialize_real<S: Serializer>(v: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if v.is_finite() {
        s.serialize_f64(*v)
    } else if v.is_nan() {
        s.serialize_str("nan")
    } else if *v > 0.0 {
        s.serialize_str("inf")
    } else {
        s.serialize_str("-inf")
    }
}

fn serialize_opt_real<S: Serializer>(v: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
    match v {
        Some(x) => serialize_real(x, s),
        None => s.serialize_none(),
    }
}

/// One experiment for one method.
#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    #[serde(serialize_with = "serialize_display")]
    pub example: Source,
    pub method: Method,
    pub order: u32,
    pub samples: usize,
    pub runs: usize,
    pub seed: u64,
    pub epsilon: Epsilon,
    pub cv_folds: usize,
    /// What FSS correlates candidates against.
    pub score: ScoreTarget,
    /// Whether wall times are measured. Off by default so reports are
    /// byte-for-byte reproducible.
    #[serde(skip)]
    pub timing: bool,
}

impl ExperimentConfig {
    pub fn new(example: Source, method: Method, order: u32, samples: usize) -> Self {
        Self {
            example,
            method,
            order,
            samples,
            runs: 1,
            seed: 0,
            epsilon: Epsilon::Auto,
            cv_folds: 5,
            score: ScoreTarget::Residual,
            timing: false,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.runs < 1 {
            return Err(PceError::Parameter("runs must be at least 1".into()));
        }
        if self.samples < 2 {
            return Err(PceError::Parameter("samples must be at least 2".into()));
        }
        if self.cv_folds < 2 {
            return Err(PceError::Parameter("cv-folds must be at least 2".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub run: usize,
    #[serde(serialize_with = "serialize_real")]
    pub sd: f64,
    /// Absent when the data source has no reference deviation.
    #[serde(serialize_with = "serialize_opt_real")]
    pub re: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    pub kl: Option<f64>,
    pub time_s: f64,
    pub terms: usize,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AggregateRow {
    #[serde(serialize_with = "serialize_real")]
    pub sd_mean: f64,
    #[serde(serialize_with = "serialize_real")]
    pub sd_se: f64,
    #[serde(serialize_with = "serialize_opt_real")]
    pub re_mean: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    pub re_se: Option<f64>,
    /// Relative error of `sd_mean` itself.
    #[serde(serialize_with = "serialize_opt_real")]
    pub sd_mean_re: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    pub kl_mean: Option<f64>,
    #[serde(serialize_with = "serialize_opt_real")]
    pub kl_se: Option<f64>,
    pub kl_infinite: bool,
    pub time_mean_s: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    /// How per-run seeds derive from the base seed.
    pub seed_rule: &'static str,
    #[serde(serialize_with = "serialize_opt_real")]
    pub reference_sd: Option<f64>,
    pub runs: Vec<RunRow>,
    pub aggregate: AggregateRow,
}

pub const SEED_RULE: &str = "run_seed = splitmix64(seed ^ splitmix64(run)); training sample from ChaCha8 stream (run_seed, 0), \
truth evaluation sample from stream (run_seed, 1), model evaluation sample from stream (run_seed, 2), folds from stream (splitmix64(run_seed), 0); csv rows are permuted with stream (run_seed, 3)";

/// Where the data of each run comes from.
enum Generator {
    Model(Example),
    Rows(Dataset),
}

impl Generator {
    fn new(source: &Source) -> Result<Self> {
        Ok(match source {
            Source::Example(e) => Self::Model(*e),
            Source::Csv(path) => Self::Rows(Dataset::read_csv(std::fs::File::open(path)?)?),
        })
    }

    fn reference_sd(&self) -> Option<f64> {
        match self {
            Self::Model(e) => Some(e.model().reference_sd),
            Self::Rows(_) => None,
        }
    }

    /// Training data plus (true outputs, model-evaluation inputs) for the KL.
    fn draw(&self, samples: usize, seed: u64) -> Result<(Dataset, Option<(Vec<f64>, Dataset)>)> {
        match self {
            Self::Model(e) => {
                let train = e.sample(samples, &mut stream(seed, 0))?;
                let truth = e.sample(EVALUATION_SAMPLES, &mut stream(seed, 1))?;
                let eval = e.sample(EVALUATION_SAMPLES, &mut stream(seed, 2))?;
                Ok((train, Some((truth.outputs().to_vec(), eval))))
            }
            Self::Rows(all) => {
                let m = all.len();
                if samples > m {
                    return Err(PceError::Parameter(format!("{samples} samples requested, file has {m} rows")));
                }
                let mut rows: Vec<usize> = (0..m).collect();
                rows.shuffle(&mut stream(seed, 3));
                let train = all.subset(&sorted(&rows[..samples]));
                let rest = sorted(&rows[samples..]);
                // Held-out rows serve as both the truth and the evaluation inputs.
                let heldout = (rest.len() >= 2).then(|| {
                    let d = all.subset(&rest);
                    (d.outputs().to_vec(), d)
                });
                Ok((train, heldout))
            }
        }
    }
}

fn sorted(rows: &[usize]) -> Vec<usize> {
    let mut v = rows.to_vec();
    v.sort_unstable();
    v
}

/// Fits one dataset with the configured method.
pub fn fit(data: &Dataset, config: &ExperimentConfig, seed: u64) -> Result<(PceModel, Vec<String>)> {
    match config.method {
        Method::Fss => {
            let mut cfg = FssConfig::new(config.order).with_seed(seed);
            cfg.cv_folds = config.cv_folds;
            cfg.score_target = config.score;
            cfg.threshold = match config.epsilon {
                Epsilon::Auto => Threshold::Auto,
                Epsilon::Fixed(e) => Threshold::Fixed(e),
            };
            let fit = fit_fss_pce(data, &cfg)?;
            Ok((fit.model, fit.trace.warnings))
        }
        Method::Benchmark => {
            let mut cfg = BenchmarkConfig::new(config.order).with_seed(seed);
            cfg.cv_folds = config.cv_folds;
            let fit = fit_benchmark_sparse_pce(data, &cfg)?;
            Ok((fit.model, fit.trace.warnings))
        }
    }
}

fn run_once(config: &ExperimentConfig, generator: &Generator, run: usize) -> Result<RunRow> {
    let seed = run_seed(config.seed, run as u64);
    let (train, eval) = generator.draw(config.samples, seed)?;
    let start = Instant::now();
    let (model, warnings) = fit(&train, config, splitmix64(seed))?;
    let elapsed = start.elapsed().as_secs_f64();
    let sd = model.sd_estimate();
    let re = generator.reference_sd().map(|r| relative_error(r, sd)).transpose()?;
    let kl = match eval {
        Some((truth, inputs)) => {
            let predicted = model.predict(inputs.inputs())?;
            Some(kl_divergence_knn(&truth, &predicted, 1)?)
        }
        None => None,
    };
    Ok(RunRow {
        run,
        sd,
        re,
        kl,
        time_s: if config.timing { elapsed } else { 0.0 },
        terms: model.coefficients().iter().filter(|c| **c != 0.0).count(),
        warnings,
    })
}

/// Aggregates per-run rows. Means and standard errors follow
/// [`summarize_runs`]; an infinite KL in any run makes the KL aggregate
/// infinite.
pub fn aggregate(rows: &[RunRow], reference_sd: Option<f64>) -> Result<AggregateRow> {
    let sd = summarize_runs(&rows.iter().map(|r| r.sd).collect::<Vec<_>>())?;
    let collect = |f: fn(&RunRow) -> Option<f64>| -> Option<Vec<f64>> { rows.iter().map(f).collect() };
    let re = collect(|r| r.re).map(|v| summarize_runs(&v)).transpose()?;
    let kl = collect(|r| r.kl).map(|v| summarize_runs(&v)).transpose()?;
    let time = rows.iter().map(|r| r.time_s).sum::<f64>() / rows.len() as f64;
    Ok(AggregateRow {
        sd_mean: sd.mean(),
        sd_se: sd.standard_error(),
        re_mean: re.map(|a| a.mean()),
        re_se: re.map(|a| a.standard_error()),
        sd_mean_re: reference_sd.map(|r| relative_error(r, sd.mean())).transpose()?,
        kl_mean: kl.map(|a| a.mean()),
        kl_se: kl.map(|a| a.standard_error()),
        kl_infinite: kl.is_some_and(|a| a.is_infinite()),
        time_mean_s: time,
    })
}

/// Runs every repetition of one experiment. Rows are ordered by run index
/// whatever the execution order.
pub fn run_experiment(config: &ExperimentConfig) -> Result<ExperimentReport> {
    config.validate()?;
    let generator = Generator::new(&config.example)?;
    let runs: Vec<RunRow> = (0..config.runs)
        .into_par_iter()
        .map(|r| run_once(config, &generator, r))
        .collect::<Result<_>>()?;
    let aggregate = aggregate(&runs, generator.reference_sd())?;
    Ok(ExperimentReport {
        config: config.clone(),
        seed_rule: SEED_RULE,
        reference_sd: generator.reference_sd(),
        runs,
        aggregate,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub enum SweepAxis {
    Order(Vec<u32>),
    Samples(Vec<usize>),
}

#[derive(Debug, Clone)]
pub struct SweepPoint {
    pub axis_value: f64,
    pub report: ExperimentReport,
}

/// One experiment per axis value and method.
pub fn run_sweep(base: &ExperimentConfig, methods: &[Method], axis: &SweepAxis) -> Result<Vec<SweepPoint>> {
    let values: Vec<(f64, ExperimentConfig)> = match axis {
        SweepAxis::Order(v) => v
            .iter()
            .map(|&p| (p as f64, ExperimentConfig { order: p, ..base.clone() }))
            .collect(),
        SweepAxis::Samples(v) => v
            .iter()
            .map(|&m| (m as f64, ExperimentConfig { samples: m, ..base.clone() }))
            .collect(),
    };
    if values.is_empty() {
        return Err(PceError::Parameter("sweep axis is empty".into()));
    }
    let mut out = Vec::new();
    for (axis_value, cfg) in values {
        for &method in methods {
            let report = run_experiment(&ExperimentConfig { method, ..cfg.clone() })?;
            out.push(SweepPoint { axis_value, report });
        }
    }
    Ok(out)
}

/// Tidy CSV: `axis_value,method,re_mean,re_se,kl_mean,time_mean`.
pub fn write_sweep_csv<W: std::io::Write>(points: &[SweepPoint], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["axis_value", "method", "re_mean", "re_se", "kl_mean", "time_mean"])?;
    for p in points {
        let a = &p.report.aggregate;
        w.write_record([
            format_real(p.axis_value),
            p.report.config.method.name().to_string(),
            a.re_mean.map_or(String::new(), format_real),
            a.re_se.map_or(String::new(), format_real),
            a.kl_mean.map_or(String::new(), format_real),
            format_real(a.time_mean_s),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Per-run CSV: `method,run,sd,re,kl,time_s,terms,warnings`.
pub fn write_runs_csv<W: std::io::Write>(reports: &[ExperimentReport], writer: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["method", "run", "sd", "re", "kl", "time_s", "terms", "warnings"])?;
    for (report, r) in reports.iter().flat_map(|rep| rep.runs.iter().map(move |r| (rep, r))) {
        w.write_record([
            report.config.method.name().to_string(),
            r.run.to_string(),
            format_real(r.sd),
            r.re.map_or(String::new(), format_real),
            r.kl.map_or(String::new(), format_real),
            format_real(r.time_s),
            r.terms.to_string(),
            r.warnings.join("; "),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn format_real(v: f64) -> String {
    if v.is_finite() {
        format!("{v}")
    } else if v.is_nan() {
        "nan".into()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}
