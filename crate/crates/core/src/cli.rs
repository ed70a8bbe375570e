//! Command-line interface.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 solver failure.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::classifier::{Priors, Ridge};
use crate::error::{Error, Result};
use crate::io::{self, DataFileSchema};
use crate::l1solver::SolverConfig;
use crate::methods::{FitContext, Registry};
use crate::model_selection::{self, CvPlan, LambdaGrid, DEFAULT_FOLDS, DEFAULT_GRID_SIZE};
use crate::simulation::{self, BenchmarkOptions, Distribution, ModelKind, SimulationSpec};
use crate::stats;

/// Optional cap on worker threads for `simulate`.
pub const THREADS_ENV: &str = "LPD_THREADS";

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "lpd", version, about = "Sparse linear discriminant analysis via constrained l1 minimization")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Fit a classifier and write it as a JSON model file.
    Train(TrainArgs),
    /// Classify samples with a saved model.
    Predict(PredictArgs),
    /// Report cross-validated correct counts over a λ grid.
    Cv(CvArgs),
    /// Run a replicated benchmark on synthetic data.
    Simulate(SimulateArgs),
    /// Variance filtering and top-k t-statistic screening.
    Screen(ScreenArgs),
}

#[derive(Debug, Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = ",")]
    delimiter: char,
    /// Zero-based position of the label column.
    #[arg(long, default_value_t = 0)]
    label_column: usize,
    /// The first row holds data, not column names.
    #[arg(long)]
    no_header: bool,
}

impl DataArgs {
    fn schema(&self) -> Result<DataFileSchema> {
        Ok(DataFileSchema {
            delimiter: delimiter_byte(self.delimiter)?,
            label_column: self.label_column,
            has_header: !self.no_header,
        })
    }

    fn load(&self) -> Result<crate::stats::LabeledDataset> {
        io::load_dataset(&self.data, &self.schema()?)
    }
}

fn delimiter_byte(c: char) -> Result<u8> {
    u8::try_from(c)
        .ok()
        .filter(|b| b.is_ascii())
        .ok_or_else(|| Error::InvalidArgument(format!("delimiter must be a single ASCII character, got `{c}`")))
}

#[derive(Debug, Args)]
struct TuningArgs {
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Ridge added to the pooled covariance: a number or `auto` for sqrt(log p / n).
    #[arg(long, default_value = "auto")]
    rho: String,
}

impl TuningArgs {
    fn plan(&self) -> CvPlan {
        CvPlan {
            folds: self.folds,
            grid: LambdaGrid::Auto(self.grid_size),
            seed: self.seed,
        }
    }

    fn ridge(&self) -> Result<Ridge> {
        parse_auto(&self.rho, "rho")?.map_or(Ok(Ridge::Auto), |v| {
            if v >= 0.0 {
                Ok(Ridge::Fixed(v))
            } else {
                Err(Error::InvalidArgument(format!("rho must be non-negative, got {v}")))
            }
        })
    }
}

fn parse_auto(s: &str, what: &str) -> Result<Option<f64>> {
    if s.eq_ignore_ascii_case("auto") {
        return Ok(None);
    }
    s.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .map(Some)
        .ok_or_else(|| Error::InvalidArgument(format!("--{what} expects a number or `auto`, got `{s}`")))
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    /// A number or `auto` for cross-validation.
    #[arg(long, default_value = "auto")]
    lambda: String,
    #[command(flatten)]
    tuning: TuningArgs,
    /// Registered method name (`lpd`, `naive`, `glda`).
    #[arg(long, default_value = "lpd")]
    method: String,
    /// `equal`, `estimated`, or `p1,p2`.
    #[arg(long, default_value = "equal")]
    priors: String,
    /// Index file from `screen --kept-out`; stored so the model addresses original features.
    #[arg(long)]
    kept: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(short, long)]
    verbose: bool,
}

#[derive(Debug, Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long, default_value = ",")]
    delimiter: char,
    #[arg(long)]
    no_header: bool,
    /// Every column is a feature (no label column).
    #[arg(long)]
    unlabeled: bool,
    #[arg(long, default_value_t = 0)]
    label_column: usize,
    /// Defaults to standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct CvArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    tuning: TuningArgs,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=3))]
    model_id: u8,
    #[arg(long, default_value_t = 100)]
    p: usize,
    #[arg(long, default_value_t = 200)]
    n1: usize,
    #[arg(long, default_value_t = 200)]
    n2: usize,
    #[arg(long, default_value_t = 10)]
    s0: usize,
    /// Defaults to 0.5 for model 1 and 0.8 for model 3.
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long, default_value = "normal")]
    dist: String,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, value_delimiter = ',', default_value = "lpd,naive,glda,ofair,oracle")]
    methods: Vec<String>,
    #[arg(long, default_value_t = DEFAULT_FOLDS)]
    folds: usize,
    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    grid_size: usize,
    #[arg(long)]
    out: PathBuf,
    /// Per-replication table.
    #[arg(long)]
    records: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ScreenArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, allow_negative_numbers = true)]
    var_min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    var_max: Option<f64>,
    #[arg(long, default_value_t = 1.0)]
    scale: f64,
    #[arg(long)]
    top_k: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Original indices of the kept features.
    #[arg(long)]
    kept_out: Option<PathBuf>,
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Solver(_) | Error::NoEligibleLambda => EXIT_SOLVER,
        Error::Linalg(_) | Error::Data(_) | Error::Io(_) | Error::ZeroBeta => EXIT_DATA,
        Error::UnknownMethod(_) | Error::NeedsGroundTruth(_) | Error::InvalidArgument(_) => EXIT_USAGE,
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    let result = match cli.command {
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Cv(a) => cv(a),
        Command::Simulate(a) => simulate(a),
        Command::Screen(a) => screen(a),
    };
    match result {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => Ok(io::write_atomic(p, text.as_bytes())?),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn parse_priors(s: &str) -> Result<Priors> {
    match s {
        "equal" => Ok(Priors::Equal),
        "estimated" => Ok(Priors::Estimated),
        _ => {
            let parts: Vec<&str> = s.split(',').collect();
            let nums: Option<Vec<f64>> = parts.iter().map(|v| v.trim().parse().ok()).collect();
            match nums.as_deref() {
                Some(&[a, b]) => Ok(Priors::Known(a, b)),
                _ => Err(Error::InvalidArgument(format!(
                    "--priors expects `equal`, `estimated` or `p1,p2`, got `{s}`"
                ))),
            }
        }
    }
}

fn train(a: TrainArgs) -> Result<()> {
    let data = a.data.load()?;
    let registry = Registry::default();
    let method = registry.get(&a.method)?;
    let mut ctx = FitContext::new(&data);
    ctx.lambda = parse_auto(&a.lambda, "lambda")?;
    ctx.cv = a.tuning.plan();
    ctx.ridge = a.tuning.ridge()?;
    ctx.priors = parse_priors(&a.priors)?;
    let fitted = method.fit(&ctx)?;
    if a.verbose {
        if let Some(cv) = &fitted.cv {
            eprint!("{}", io::format_cv(cv)?);
        }
        eprintln!(
            "lambda = {}, ridge = {}, nonzeros = {}",
            fitted.model.lambda,
            fitted.model.ridge_rho,
            crate::l1solver::support_of(&fitted.model.beta, ctx.solver.support_eps).len()
        );
    }
    let mut model = fitted.model;
    if let Some(path) = &a.kept {
        let kept = io::load_indices(path)?;
        if kept.len() != model.dim() {
            return Err(Error::InvalidArgument(format!(
                "index file lists {} features, data has {}",
                kept.len(),
                model.dim()
            )));
        }
        model.kept_indices = Some(kept);
    }
    model.metadata.insert("data".into(), a.data.data.display().to_string());
    model.metadata.insert("seed".into(), a.tuning.seed.to_string());
    model.metadata.insert("rho_setting".into(), a.tuning.rho.clone());
    if data.label_names.len() >= 2 {
        model.metadata.insert("class1_label".into(), data.label_names[0].clone());
        model.metadata.insert("class2_label".into(), data.label_names[1].clone());
    }
    io::save_model(&a.out, &model)
}

fn predict(a: PredictArgs) -> Result<()> {
    let model = io::load_model(&a.model)?;
    let delimiter = delimiter_byte(a.delimiter)?;
    let features = if a.unlabeled {
        io::load_features(&a.data, delimiter, !a.no_header)?
    } else {
        let schema = DataFileSchema {
            delimiter,
            label_column: a.label_column,
            has_header: !a.no_header,
        };
        io::load_dataset(&a.data, &schema)?.features().clone()
    };
    let mut rows = Vec::with_capacity(features.rows());
    for i in 0..features.rows() {
        let score = model.score(features.row(i))?;
        rows.push((model.class_of_score(score), score));
    }
    emit(a.out.as_deref(), &io::format_predictions(&rows)?)
}

fn cv(a: CvArgs) -> Result<()> {
    let data = a.data.load()?;
    let result = model_selection::cross_validate(&data, &a.tuning.plan(), a.tuning.ridge()?, &SolverConfig::default())?;
    for (lambda, why) in result.grid.iter().zip(&result.ineligible) {
        if let Some(why) = why {
            eprintln!("lambda {lambda} ineligible: {why}");
        }
    }
    eprintln!("chosen lambda = {}", result.chosen_lambda);
    emit(a.out.as_deref(), &io::format_cv(&result)?)
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let model = ModelKind::from_id(a.model_id)?;
    let mut spec = SimulationSpec::new(model, a.p);
    spec.n1 = a.n1;
    spec.n2 = a.n2;
    spec.s0 = a.s0;
    if let Some(rho) = a.rho {
        spec.rho = rho;
    }
    spec.distribution = a.dist.parse::<Distribution>()?;
    spec.reps = a.reps;
    spec.seed = a.seed;
    let registry = Registry::default();
    let methods = registry.select(&a.methods)?;
    let options = BenchmarkOptions {
        cv: CvPlan {
            folds: a.folds,
            grid: LambdaGrid::Auto(a.grid_size),
            seed: 0,
        },
        ..BenchmarkOptions::default()
    };
    let threads = match std::env::var(THREADS_ENV) {
        Ok(v) => Some(
            v.parse::<usize>()
                .ok()
                .filter(|&t| t > 0)
                .ok_or_else(|| Error::InvalidArgument(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?,
        ),
        Err(_) => None,
    };
    let report = match threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build()
            .map_err(|e| Error::InvalidArgument(e.to_string()))?
            .install(|| simulation::run_benchmark(&spec, &methods, &options))?,
        None => simulation::run_benchmark(&spec, &methods, &options)?,
    };
    for m in &report.methods {
        eprintln!(
            "{:>8}: {:.2}% ({:.2}), {} failed",
            m.method, m.error_pct.mean, m.error_pct.sd, m.failures
        );
    }
    eprintln!("  oracle rate: {:.2}%", report.oracle_rate_pct.mean);
    io::write_atomic(&a.out, io::format_report(&report)?.as_bytes())?;
    if let Some(path) = &a.records {
        io::write_atomic(path, io::format_records(&report)?.as_bytes())?;
    }
    Ok(())
}

fn screen(a: ScreenArgs) -> Result<()> {
    let mut data = a.data.load()?;
    data.feature_names = Some(io::feature_names(&data));
    let mut kept: Vec<usize> = (0..data.p()).collect();
    if a.var_min.is_some() || a.var_max.is_some() {
        let s = stats::variance_filter(
            &data,
            a.var_min.unwrap_or(f64::NEG_INFINITY),
            a.var_max.unwrap_or(f64::INFINITY),
            a.scale,
        )?;
        eprintln!("variance filter kept {} of {} features", s.kept.len(), data.p());
        kept = s.kept.iter().map(|&j| kept[j]).collect();
        data = s.data;
    }
    if let Some(k) = a.top_k {
        let s = stats::t_statistic_screen(&data, k)?;
        if s.clamped {
            eprintln!("warning: top-k {k} exceeds the {} available features; keeping all", data.p());
        }
        kept = s.kept.iter().map(|&j| kept[j]).collect();
        data = s.data;
    }
    let schema = a.data.schema()?;
    let text = io::format_dataset(&data, &DataFileSchema { has_header: true, ..schema })?;
    io::write_atomic(&a.out, text.as_bytes())?;
    if let Some(p) = &a.kept_out {
        io::write_atomic(p, io::format_indices(&kept).as_bytes())?;
    }
    Ok(())
}
