use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::{LpdModel, Ridge};
use crate::error::Result;
use crate::l1solver::SolverConfig;
use crate::linalg::DEFAULT_RANK_TOL;
use crate::methods::{FitContext, Method};
use crate::model_selection::{fit_path, CvPlan};
use crate::stats::{self, LabeledDataset};

use super::metrics::{conditional_rate, oracle_rate, support_metrics, SupportMetrics};
use super::models::{build_model, sample, GroundTruth};
use super::SimulationSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkOptions {
    /// Folds and grid; the fold seed is drawn per replication.
    pub cv: CvPlan,
    pub solver: SolverConfig,
    pub ridge: Ridge,
    pub rank_tol: f64,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        BenchmarkOptions {
            cv: CvPlan::default(),
            solver: SolverConfig::default(),
            ridge: Ridge::Auto,
            rank_tol: DEFAULT_RANK_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodOutcome {
    pub method: String,
    /// Test misclassification fraction; `None` when the fit failed.
    pub error: Option<f64>,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpdDiagnostics {
    pub lambda_hat: f64,
    /// Grid λ with the smallest test error (smallest λ among ties).
    pub lambda_opt: f64,
    pub lambda_opt_error: f64,
    pub support: SupportMetrics,
    /// `None` when `β̂ = 0`.
    pub conditional_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RepRecord {
    pub rep: usize,
    pub oracle_rate: Option<f64>,
    pub outcomes: Vec<MethodOutcome>,
    pub lpd: Option<LpdDiagnostics>,
}

/// Mean and sample standard deviation (divisor `count − 1`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Summary {
    pub mean: f64,
    pub sd: f64,
    pub count: usize,
}

impl Summary {
    pub fn of(values: &[f64]) -> Summary {
        let count = values.len();
        if count == 0 {
            return Summary {
                mean: f64::NAN,
                sd: f64::NAN,
                count,
            };
        }
        let mean = values.iter().sum::<f64>() / count as f64;
        let sd = if count < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1) as f64).sqrt()
        };
        Summary { mean, sd, count }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MethodSummary {
    pub method: String,
    /// Test error in percent.
    pub error_pct: Summary,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpdSummary {
    pub pos: Summary,
    pub tpos: Summary,
    pub tpr: Summary,
    pub fpr: Summary,
    pub lambda_hat: Summary,
    pub lambda_opt: Summary,
    /// Conditional rate in percent.
    pub conditional_rate_pct: Summary,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub spec: SimulationSpec,
    /// Oracle rate in percent, averaged over replications (Model 2 redraws `Ω`).
    pub oracle_rate_pct: Summary,
    pub methods: Vec<MethodSummary>,
    pub lpd: Option<LpdSummary>,
    pub records: Vec<RepRecord>,
}

impl EvalReport {
    pub fn method(&self, name: &str) -> Option<&MethodSummary> {
        self.methods.iter().find(|m| m.method == name)
    }
}

fn error_fraction(model: &LpdModel, data: &LabeledDataset) -> Result<f64> {
    model.error_rate(data)
}

fn lpd_diagnostics(
    fitted: &crate::methods::Fitted,
    truth: &GroundTruth,
    train: &LabeledDataset,
    test: &LabeledDataset,
    options: &BenchmarkOptions,
) -> Result<Option<LpdDiagnostics>> {
    let Some(cv) = &fitted.cv else {
        return Ok(None);
    };
    let moments = stats::compute_moments(train)?;
    let mut best: Option<(f64, f64)> = None;
    for (lambda, fit) in cv.grid.iter().zip(fit_path(&moments, &cv.grid, options.ridge, &options.solver)) {
        let Ok(model) = fit else { continue };
        let err = error_fraction(&model, test)?;
        best = match best {
            Some((l, e)) if e < err || (e == err && l < *lambda) => Some((l, e)),
            _ => Some((*lambda, err)),
        };
    }
    let (lambda_opt, lambda_opt_error) = best.unwrap_or((f64::NAN, f64::NAN));
    Ok(Some(LpdDiagnostics {
        lambda_hat: cv.chosen_lambda,
        lambda_opt,
        lambda_opt_error,
        support: support_metrics(&fitted.model.beta, &truth.beta_star, options.solver.support_eps)?,
        conditional_rate: conditional_rate(truth, &fitted.model).ok(),
    }))
}

fn run_rep(spec: &SimulationSpec, methods: &[&dyn Method], options: &BenchmarkOptions, rep: usize) -> RepRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(rep as u64);
    let failed_all = |msg: String| RepRecord {
        rep,
        oracle_rate: None,
        outcomes: methods
            .iter()
            .map(|m| MethodOutcome {
                method: m.name().to_string(),
                error: None,
                failure: Some(msg.clone()),
            })
            .collect(),
        lpd: None,
    };
    let setup = (|| -> Result<_> {
        let truth = build_model(spec, &mut rng)?;
        let train = sample(&truth, spec, &mut rng)?;
        let test = sample(&truth, spec, &mut rng)?;
        Ok((truth, train, test))
    })();
    let (truth, train, test) = match setup {
        Ok(v) => v,
        Err(e) => return failed_all(e.to_string()),
    };
    let mut cv = options.cv.clone();
    cv.seed = rng.random();

    let mut outcomes = Vec::with_capacity(methods.len());
    let mut lpd = None;
    for method in methods {
        let ctx = FitContext {
            truth: Some(&truth),
            cv: cv.clone(),
            ridge: options.ridge,
            solver: options.solver.clone(),
            rank_tol: options.rank_tol,
            ..FitContext::new(&train)
        };
        let result = method.fit(&ctx).and_then(|fitted| {
            let err = error_fraction(&fitted.model, &test)?;
            if method.name() == "lpd" && lpd.is_none() {
                lpd = lpd_diagnostics(&fitted, &truth, &train, &test, options)?;
            }
            Ok(err)
        });
        outcomes.push(match result {
            Ok(err) => MethodOutcome {
                method: method.name().to_string(),
                error: Some(err),
                failure: None,
            },
            Err(e) => MethodOutcome {
                method: method.name().to_string(),
                error: None,
                failure: Some(e.to_string()),
            },
        });
    }
    RepRecord {
        rep,
        oracle_rate: Some(oracle_rate(&truth)),
        outcomes,
        lpd,
    }
}

/// Runs `spec.reps` independent replications in parallel. Replication `r`
/// draws everything from the ChaCha8 stream `(spec.seed, r)`, so results do
/// not depend on scheduling. Failed fits are excluded from the means and
/// counted per method.
pub fn run_benchmark(spec: &SimulationSpec, methods: &[&dyn Method], options: &BenchmarkOptions) -> Result<EvalReport> {
    spec.validate()?;
    options.cv.validate()?;
    options.solver.validate()?;
    let records: Vec<RepRecord> = (0..spec.reps)
        .into_par_iter()
        .map(|rep| run_rep(spec, methods, options, rep))
        .collect();

    let pct = |v: f64| 100.0 * v;
    let summaries = methods
        .iter()
        .enumerate()
        .map(|(k, m)| {
            let errs: Vec<f64> = records.iter().filter_map(|r| r.outcomes[k].error).map(pct).collect();
            MethodSummary {
                method: m.name().to_string(),
                failures: spec.reps - errs.len(),
                error_pct: Summary::of(&errs),
            }
        })
        .collect();

    let diags: Vec<&LpdDiagnostics> = records.iter().filter_map(|r| r.lpd.as_ref()).collect();
    let lpd = (!diags.is_empty()).then(|| {
        let col = |f: &dyn Fn(&LpdDiagnostics) -> f64| Summary::of(&diags.iter().map(|d| f(d)).collect::<Vec<_>>());
        LpdSummary {
            pos: col(&|d| d.support.pos as f64),
            tpos: col(&|d| d.support.tpos as f64),
            tpr: col(&|d| d.support.tpr),
            fpr: col(&|d| d.support.fpr),
            lambda_hat: col(&|d| d.lambda_hat),
            lambda_opt: col(&|d| d.lambda_opt),
            conditional_rate_pct: Summary::of(&diags.iter().filter_map(|d| d.conditional_rate).map(pct).collect::<Vec<_>>()),
        }
    });
    let oracle: Vec<f64> = records.iter().filter_map(|r| r.oracle_rate).map(pct).collect();
    Ok(EvalReport {
        spec: spec.clone(),
        oracle_rate_pct: Summary::of(&oracle),
        methods: summaries,
        lpd,
        records,
    })
}
