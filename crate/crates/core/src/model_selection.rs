//! Choosing λ by stratified N-fold cross-validation.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::classifier::{fit_lpd_moments, LpdModel, LpdParams, Priors, Ridge};
use crate::error::{Error, Result};
use crate::l1solver::SolverConfig;
use crate::stats::{self, DataError, LabeledDataset, TwoSampleMoments};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_GRID_SIZE: usize = 20;
/// Ratio between the largest and smallest λ of the default grid.
pub const GRID_SPAN: f64 = 50.0;

#[derive(Debug, Clone, PartialEq)]
pub enum LambdaGrid {
    Explicit(Vec<f64>),
    /// [`default_lambda_grid`] of this size, anchored on the full training data.
    Auto(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvPlan {
    pub folds: usize,
    pub grid: LambdaGrid,
    pub seed: u64,
}

impl Default for CvPlan {
    fn default() -> Self {
        CvPlan {
            folds: DEFAULT_FOLDS,
            grid: LambdaGrid::Auto(DEFAULT_GRID_SIZE),
            seed: 0,
        }
    }
}

impl CvPlan {
    pub fn validate(&self) -> Result<()> {
        if self.folds < 2 {
            return Err(Error::InvalidArgument(format!("need at least 2 folds, got {}", self.folds)));
        }
        match &self.grid {
            LambdaGrid::Auto(size) if *size < 2 => {
                Err(Error::InvalidArgument(format!("grid size must be at least 2, got {size}")))
            }
            LambdaGrid::Auto(_) => Ok(()),
            LambdaGrid::Explicit(g) => validate_grid(g),
        }
    }

    /// The concrete grid for `data`.
    pub fn resolve_grid(&self, data: &LabeledDataset) -> Result<Vec<f64>> {
        match &self.grid {
            LambdaGrid::Explicit(g) => Ok(g.clone()),
            LambdaGrid::Auto(size) => default_lambda_grid(&stats::compute_moments(data)?, *size),
        }
    }
}

fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::InvalidArgument("empty λ grid".into()));
    }
    if let Some(bad) = grid.iter().find(|l| !(l.is_finite() && **l > 0.0)) {
        return Err(Error::InvalidArgument(format!("λ values must be positive, got {bad}")));
    }
    let down = grid.windows(2).all(|w| w[0] > w[1]);
    let up = grid.windows(2).all(|w| w[0] < w[1]);
    if !(down || up) {
        return Err(Error::InvalidArgument("λ grid must be strictly monotone".into()));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct CvResult {
    pub grid: Vec<f64>,
    /// Correct validation predictions summed over folds, per grid point.
    pub per_lambda_correct: Vec<usize>,
    /// Grid points where some fold failed to fit, with the first failure.
    pub ineligible: Vec<Option<String>>,
    pub chosen_lambda: f64,
    /// Fold id in `0..folds` for every sample.
    pub fold_assignments: Vec<usize>,
    pub total: usize,
}

/// Stratified fold assignment: every class is shuffled and dealt round-robin
/// into `folds` subgroups, so each fold sees every class.
pub fn make_folds(data: &LabeledDataset, folds: usize, seed: u64) -> Result<Vec<usize>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; data.n()];
    for class in data.class_ids() {
        let mut idx = data.class_indices(class);
        if idx.len() < folds {
            return Err(DataError::TooFewSamples {
                class,
                count: idx.len(),
                needed: folds,
            }
            .into());
        }
        idx.shuffle(&mut rng);
        for (pos, i) in idx.into_iter().enumerate() {
            assignment[i] = pos % folds;
        }
    }
    Ok(assignment)
}

/// Geometric grid of `size` points from `|δ̂|∞` down to `|δ̂|∞ / 50`.
pub fn default_lambda_grid(moments: &TwoSampleMoments, size: usize) -> Result<Vec<f64>> {
    if size < 2 {
        return Err(Error::InvalidArgument(format!("grid size must be at least 2, got {size}")));
    }
    let lambda_max = crate::linalg::norm_inf(&moments.delta_hat);
    if lambda_max == 0.0 {
        return Err(DataError::DegenerateDelta.into());
    }
    let step = GRID_SPAN.ln() / (size - 1) as f64;
    Ok((0..size)
        .map(|i| if i == 0 { lambda_max } else { lambda_max * (-(i as f64) * step).exp() })
        .collect())
}

/// Fits the LPD rule at every λ of `grid` on the same moments.
pub fn fit_path(
    moments: &TwoSampleMoments,
    grid: &[f64],
    ridge: Ridge,
    config: &SolverConfig,
) -> Vec<Result<LpdModel>> {
    grid.iter()
        .map(|&lambda| {
            let params = LpdParams {
                lambda,
                ridge,
                priors: Priors::Equal,
                solver: config.clone(),
            };
            fit_lpd_moments(moments, &params).map(|(m, _)| m)
        })
        .collect()
}

/// Index of the largest count among eligible grid points; ties go to the smallest λ.
fn select(grid: &[f64], counts: &[usize], ineligible: &[Option<String>]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for i in 0..grid.len() {
        if ineligible[i].is_some() {
            continue;
        }
        best = match best {
            Some(b) if counts[b] > counts[i] || (counts[b] == counts[i] && grid[b] < grid[i]) => Some(b),
            _ => Some(i),
        };
    }
    best
}

/// N-fold cross-validation of λ: counts correct validation predictions for
/// each grid point and picks the maximizer (smallest λ among ties).
pub fn cross_validate(
    data: &LabeledDataset,
    plan: &CvPlan,
    ridge: Ridge,
    config: &SolverConfig,
) -> Result<CvResult> {
    plan.validate()?;
    data.check_binary(2)?;
    let grid = plan.resolve_grid(data)?;
    let assignment = make_folds(data, plan.folds, plan.seed)?;

    let per_fold: Vec<Result<Vec<std::result::Result<usize, String>>>> = (0..plan.folds)
        .into_par_iter()
        .map(|fold| {
            let (val, train): (Vec<usize>, Vec<usize>) = (0..data.n()).partition(|&i| assignment[i] == fold);
            let moments = stats::compute_moments(&data.subset(&train))?;
            Ok(fit_path(&moments, &grid, ridge, config)
                .into_iter()
                .map(|fit| match fit {
                    Ok(model) => Ok(count_correct(&model, data, &val)),
                    Err(e) => Err(e.to_string()),
                })
                .collect())
        })
        .collect();

    let mut counts = vec![0usize; grid.len()];
    let mut ineligible: Vec<Option<String>> = vec![None; grid.len()];
    for (fold, outcome) in per_fold.into_iter().enumerate() {
        for (i, r) in outcome?.into_iter().enumerate() {
            match r {
                Ok(c) => counts[i] += c,
                Err(msg) => {
                    ineligible[i].get_or_insert(format!("fold {fold}: {msg}"));
                }
            }
        }
    }
    let chosen = select(&grid, &counts, &ineligible).ok_or(Error::NoEligibleLambda)?;
    Ok(CvResult {
        chosen_lambda: grid[chosen],
        grid,
        per_lambda_correct: counts,
        ineligible,
        fold_assignments: assignment,
        total: data.n(),
    })
}

fn count_correct(model: &LpdModel, data: &LabeledDataset, rows: &[usize]) -> usize {
    rows.iter()
        .filter(|&&i| {
            // sample dimensions match by construction
            let score = model.score(data.sample(i)).expect("fold dimensions");
            model.class_of_score(score) == data.labels()[i]
        })
        .count()
}
