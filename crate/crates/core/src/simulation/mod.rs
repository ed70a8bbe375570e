//! Synthetic two-class Gaussian / t5 problems and replicated benchmarks.

mod benchmark;
mod metrics;
mod models;

pub use benchmark::{
    run_benchmark, BenchmarkOptions, EvalReport, LpdDiagnostics, LpdSummary, MethodOutcome, MethodSummary,
    RepRecord, Summary,
};
pub use metrics::{conditional_rate, normal_cdf, oracle_rate, support_metrics, SupportMetrics};
pub use models::{build_model, sample, GroundTruth};

use crate::error::{Error, Result};

/// Covariance structure of the population.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ModelKind {
    /// Model 1: unit diagonal, constant off-diagonal `ρ`.
    CompoundSymmetry,
    /// Model 2: random sparse precision matrix with Bernoulli(0.2) links
    /// among the first `s0` coordinates.
    SparsePrecision,
    /// Model 3: `σij = ρ^|i−j|`.
    Ar1,
}

impl ModelKind {
    pub fn from_id(id: u8) -> Result<Self> {
        match id {
            1 => Ok(ModelKind::CompoundSymmetry),
            2 => Ok(ModelKind::SparsePrecision),
            3 => Ok(ModelKind::Ar1),
            _ => Err(Error::InvalidArgument(format!("model id must be 1, 2 or 3, got {id}"))),
        }
    }

    pub fn id(self) -> u8 {
        match self {
            ModelKind::CompoundSymmetry => 1,
            ModelKind::SparsePrecision => 2,
            ModelKind::Ar1 => 3,
        }
    }

    pub fn default_rho(self) -> f64 {
        match self {
            ModelKind::CompoundSymmetry => 0.5,
            ModelKind::SparsePrecision => 0.0,
            ModelKind::Ar1 => 0.8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Distribution {
    Normal,
    /// Multivariate t with 5 degrees of freedom; `Σ` is the scale matrix.
    T5,
}

impl Distribution {
    pub fn name(self) -> &'static str {
        match self {
            Distribution::Normal => "normal",
            Distribution::T5 => "t5",
        }
    }
}

impl std::str::FromStr for Distribution {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "normal" | "gaussian" => Ok(Distribution::Normal),
            "t5" => Ok(Distribution::T5),
            other => Err(Error::InvalidArgument(format!("unknown distribution `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub model: ModelKind,
    pub p: usize,
    pub n1: usize,
    pub n2: usize,
    /// Number of leading coordinates where the class means differ.
    pub s0: usize,
    /// Correlation parameter (unused by Model 2).
    pub rho: f64,
    pub distribution: Distribution,
    pub reps: usize,
    pub seed: u64,
}

impl SimulationSpec {
    /// Defaults: `n1 = n2 = 200`, `s0 = 10`, Gaussian, 20 replications, seed 0.
    pub fn new(model: ModelKind, p: usize) -> Self {
        SimulationSpec {
            model,
            p,
            n1: 200,
            n2: 200,
            s0: 10,
            rho: model.default_rho(),
            distribution: Distribution::Normal,
            reps: 20,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.p == 0 {
            return bad("p must be positive".into());
        }
        if self.s0 == 0 || self.s0 > self.p {
            return bad(format!("s0 must be in 1..={}, got {}", self.p, self.s0));
        }
        if !(self.rho > -1.0 && self.rho < 1.0) {
            return bad(format!("rho must lie in (-1, 1), got {}", self.rho));
        }
        if self.model == ModelKind::CompoundSymmetry && self.p > 1 && self.rho <= -1.0 / (self.p as f64 - 1.0) {
            return bad(format!("rho = {} is not positive definite for p = {}", self.rho, self.p));
        }
        if self.n1 < 2 || self.n2 < 2 {
            return bad("each class needs at least 2 samples".into());
        }
        if self.reps == 0 {
            return bad("reps must be at least 1".into());
        }
        Ok(())
    }
}
