//! Named fitting strategies.
//!
//! Each classification method implements [`Method`] and is registered under
//! a short name in a [`Registry`]; the CLI and the benchmark select methods by
//! name at runtime.

use std::collections::BTreeMap;

use crate::classifier::{self, LpdModel, LpdParams, Priors, Ridge};
use crate::error::{Error, Result};
use crate::l1solver::SolverConfig;
use crate::linalg::DEFAULT_RANK_TOL;
use crate::model_selection::{self, CvPlan, CvResult};
use crate::simulation::GroundTruth;
use crate::stats::LabeledDataset;

/// Everything a method may need to fit on one training set.
#[derive(Debug, Clone)]
pub struct FitContext<'a> {
    pub data: &'a LabeledDataset,
    /// Population parameters; only simulations have them.
    pub truth: Option<&'a GroundTruth>,
    /// Fixed λ for the LPD rule; `None` selects it by cross-validation.
    pub lambda: Option<f64>,
    pub cv: CvPlan,
    pub ridge: Ridge,
    pub priors: Priors,
    pub solver: SolverConfig,
    pub rank_tol: f64,
}

impl<'a> FitContext<'a> {
    pub fn new(data: &'a LabeledDataset) -> Self {
        FitContext {
            data,
            truth: None,
            lambda: None,
            cv: CvPlan::default(),
            ridge: Ridge::Auto,
            priors: Priors::Equal,
            solver: SolverConfig::default(),
            rank_tol: DEFAULT_RANK_TOL,
        }
    }

    fn require_truth(&self, method: &'static str) -> Result<&'a GroundTruth> {
        self.truth.ok_or(Error::NeedsGroundTruth(method))
    }
}

#[derive(Debug, Clone)]
pub struct Fitted {
    pub model: LpdModel,
    /// Present when λ was chosen by cross-validation.
    pub cv: Option<CvResult>,
}

impl From<LpdModel> for Fitted {
    fn from(model: LpdModel) -> Self {
        Fitted { model, cv: None }
    }
}

pub trait Method: Send + Sync {
    fn name(&self) -> &'static str;

    fn description(&self) -> &'static str;

    /// Whether the method reads population parameters from the context.
    fn needs_truth(&self) -> bool {
        false
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted>;
}

fn tag(mut model: LpdModel, method: &str) -> LpdModel {
    model.metadata.insert("method".into(), method.into());
    model
}

pub struct Lpd;

impl Method for Lpd {
    fn name(&self) -> &'static str {
        "lpd"
    }

    fn description(&self) -> &'static str {
        "ℓ1-minimal discriminant direction, λ fixed or cross-validated"
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted> {
        let (lambda, cv) = match ctx.lambda {
            Some(l) => (l, None),
            None => {
                let cv = model_selection::cross_validate(ctx.data, &ctx.cv, ctx.ridge, &ctx.solver)?;
                (cv.chosen_lambda, Some(cv))
            }
        };
        let params = LpdParams {
            lambda,
            ridge: ctx.ridge,
            priors: ctx.priors,
            solver: ctx.solver.clone(),
        };
        let mut model = tag(classifier::fit_lpd(ctx.data, &params)?, self.name());
        if let Some(cv) = &cv {
            model.metadata.insert("cv_folds".into(), ctx.cv.folds.to_string());
            model.metadata.insert("cv_seed".into(), ctx.cv.seed.to_string());
            model.metadata.insert("cv_grid_size".into(), cv.grid.len().to_string());
            model.metadata.insert("lambda_source".into(), "cv".into());
        } else {
            model.metadata.insert("lambda_source".into(), "fixed".into());
        }
        Ok(Fitted { model, cv })
    }
}

pub struct NaiveBayes;

impl Method for NaiveBayes {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn description(&self) -> &'static str {
        "independence rule using the diagonal of the pooled covariance"
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted> {
        Ok(tag(classifier::fit_naive_bayes(ctx.data)?, self.name()).into())
    }
}

pub struct Glda;

impl Method for Glda {
    fn name(&self) -> &'static str {
        "glda"
    }

    fn description(&self) -> &'static str {
        "LDA with the Moore-Penrose inverse of the pooled covariance"
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted> {
        Ok(tag(classifier::fit_glda(ctx.data, ctx.rank_tol)?, self.name()).into())
    }
}

pub struct Ofair;

impl Method for Ofair {
    fn name(&self) -> &'static str {
        "ofair"
    }

    fn description(&self) -> &'static str {
        "independence rule restricted to the true support of the mean difference"
    }

    fn needs_truth(&self) -> bool {
        true
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted> {
        let truth = ctx.require_truth(self.name())?;
        Ok(tag(classifier::fit_ofair(ctx.data, &truth.delta_support())?, self.name()).into())
    }
}

pub struct OracleFisher;

impl Method for OracleFisher {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn description(&self) -> &'static str {
        "Fisher's rule with the true means and precision matrix"
    }

    fn needs_truth(&self) -> bool {
        true
    }

    fn fit(&self, ctx: &FitContext<'_>) -> Result<Fitted> {
        let t = ctx.require_truth(self.name())?;
        Ok(tag(classifier::oracle_fisher(&t.mu1, &t.mu2, &t.omega)?, self.name()).into())
    }
}

pub struct Registry {
    methods: BTreeMap<&'static str, Box<dyn Method>>,
}

impl Default for Registry {
    fn default() -> Self {
        let mut r = Registry::empty();
        r.register(Box::new(Lpd));
        r.register(Box::new(NaiveBayes));
        r.register(Box::new(Glda));
        r.register(Box::new(Ofair));
        r.register(Box::new(OracleFisher));
        r
    }
}

impl Registry {
    pub fn empty() -> Self {
        Registry { methods: BTreeMap::new() }
    }

    /// Adds a method, replacing any previous one with the same name.
    pub fn register(&mut self, method: Box<dyn Method>) {
        self.methods.insert(method.name(), method);
    }

    pub fn get(&self, name: &str) -> Result<&dyn Method> {
        self.methods
            .get(name)
            .map(|m| m.as_ref())
            .ok_or_else(|| Error::UnknownMethod(name.to_string()))
    }

    pub fn names(&self) -> Vec<&'static str> {
        self.methods.keys().copied().collect()
    }

    /// Looks up a list of names, keeping their order and dropping repeats.
    pub fn select(&self, names: &[String]) -> Result<Vec<&dyn Method>> {
        let mut seen = Vec::new();
        let mut out = Vec::new();
        for n in names {
            let n = n.trim();
            if seen.contains(&n) {
                continue;
            }
            seen.push(n);
            out.push(self.get(n)?);
        }
        Ok(out)
    }
}
