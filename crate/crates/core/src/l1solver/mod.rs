//! Constrained ℓ1 minimization
//!
//! ```text
//! β̂ ∈ argmin |β|₁  subject to  |(A + ρI)β − b|∞ ≤ λ
//! ```
//!
//! recast as a linear program in `(β, u)` and solved with a primal-dual
//! interior-point method (Mehrotra predictor-corrector). The iteration starts
//! from `β₀ = (A + ρI)⁻¹b`, `u₀ = |β₀| + 1`, which is strictly feasible for
//! every `λ > 0`. When `A + ρI` is not positive definite a phase-1 program
//! (`min t s.t. |Aβ − b|∞ ≤ t`) supplies the start and detects infeasibility.

mod ipm;
mod program;

use thiserror::Error;

use crate::linalg::{self, Cholesky, LinalgError, Matrix};

pub use program::LpdProgram;
use program::DenseLp;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SolverError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("infeasible: smallest attainable residual {min_residual:e} exceeds lambda {lambda:e}")]
    Infeasible { lambda: f64, min_residual: f64 },
    #[error("interior-point iteration limit reached ({0} iterations)")]
    IterationLimit(usize),
    #[error("numerical failure in the interior-point iteration")]
    NumericalFailure,
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolverStatus {
    Optimal,
    IterationLimit,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    /// Relative duality-gap tolerance.
    pub gap_tol: f64,
    /// Primal / dual residual tolerance, relative to `1 + |rhs|∞`.
    pub feas_tol: f64,
    pub max_iter: usize,
    /// Entries with `|β̂_j| <= support_eps · max|β̂|` are treated as zero.
    pub support_eps: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            gap_tol: 1e-8,
            feas_tol: 1e-8,
            max_iter: 100,
            support_eps: 1e-3,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<(), SolverError> {
        let positive = |v: f64| v > 0.0 && v.is_finite();
        if !positive(self.gap_tol) || !positive(self.feas_tol) || !positive(self.support_eps) {
            return Err(SolverError::InvalidProblem("solver tolerances must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(SolverError::InvalidProblem("max_iter must be at least 1".into()));
        }
        Ok(())
    }
}

/// `ρ = sqrt(log p / n)`, the default ridge added to the sample covariance.
pub fn default_ridge(p: usize, n: usize) -> f64 {
    ((p as f64).ln().max(0.0) / n as f64).sqrt()
}

/// The program `min |β|₁ s.t. |(A + ρI)β − b|∞ ≤ λ` with symmetric `A`.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProblem {
    pub a: Matrix,
    pub b: Vec<f64>,
    pub lambda: f64,
    pub ridge_rho: f64,
}

impl LpProblem {
    pub fn new(a: Matrix, b: Vec<f64>, lambda: f64, ridge_rho: f64) -> Result<Self, SolverError> {
        let problem = LpProblem {
            a,
            b,
            lambda,
            ridge_rho,
        };
        problem.validate()?;
        Ok(problem)
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(SolverError::InvalidProblem(format!(
                "lambda must be finite and non-negative, got {}",
                self.lambda
            )));
        }
        if !(self.ridge_rho >= 0.0) || !self.ridge_rho.is_finite() {
            return Err(SolverError::InvalidProblem(format!(
                "ridge_rho must be finite and non-negative, got {}",
                self.ridge_rho
            )));
        }
        if self.b.is_empty() || self.a.rows() != self.b.len() {
            return Err(SolverError::InvalidProblem(format!(
                "constraint matrix is {}x{} but b has length {}",
                self.a.rows(),
                self.a.cols(),
                self.b.len()
            )));
        }
        if !self.a.is_finite() || !self.b.iter().all(|v| v.is_finite()) {
            return Err(SolverError::InvalidProblem("non-finite input".into()));
        }
        self.a.check_symmetric()?;
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.b.len()
    }

    /// `A + ρI`
    pub fn ridged_matrix(&self) -> Matrix {
        if self.ridge_rho == 0.0 {
            self.a.clone()
        } else {
            self.a.add_diag(self.ridge_rho)
        }
    }

    /// `|(A + ρI)β − b|∞`
    pub fn residual(&self, beta: &[f64]) -> f64 {
        let ab = self.a.mul_vec(beta);
        ab.iter()
            .zip(beta)
            .zip(&self.b)
            .map(|((a, x), b)| (a + self.ridge_rho * x - b).abs())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub beta: Vec<f64>,
    /// `|β̂|₁`
    pub objective: f64,
    /// `|(A + ρI)β̂ − b|∞`
    pub max_residual: f64,
    pub iterations: usize,
    /// Relative duality gap at exit.
    pub duality_gap: f64,
    pub status: SolverStatus,
}

impl LpSolution {
    fn exact(problem: &LpProblem, beta: Vec<f64>) -> Self {
        LpSolution {
            objective: linalg::norm1(&beta),
            max_residual: problem.residual(&beta),
            beta,
            iterations: 0,
            duality_gap: 0.0,
            status: SolverStatus::Optimal,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolverStatus::Optimal
    }

    /// Converts a non-optimal status into the matching error.
    pub fn require_optimal(self) -> Result<Self, SolverError> {
        match self.status {
            SolverStatus::Optimal => Ok(self),
            SolverStatus::IterationLimit => Err(SolverError::IterationLimit(self.iterations)),
            SolverStatus::NumericalFailure => Err(SolverError::NumericalFailure),
        }
    }
}

/// Builds the linear program in `(β, u)` with constraint matrix `A + ρI`.
pub fn build_lp(problem: &LpProblem) -> LpdProgram {
    LpdProgram::new(problem.ridged_matrix(), &problem.b, problem.lambda)
}

pub fn solve(problem: &LpProblem, config: &SolverConfig) -> Result<LpSolution, SolverError> {
    problem.validate()?;
    config.validate()?;
    let p = problem.dim();
    let lambda = problem.lambda;

    // β = 0 is feasible and has the smallest possible norm.
    if lambda >= linalg::norm_inf(&problem.b) {
        return Ok(LpSolution::exact(problem, vec![0.0; p]));
    }

    let program = build_lp(problem);
    let a_rho = program.constraint_matrix();
    let beta0 = match Cholesky::new(a_rho) {
        Ok(chol) => {
            let beta0 = chol.solve(&problem.b);
            if lambda == 0.0 {
                // the feasible set is the single point A⁻¹b
                return Ok(LpSolution::exact(problem, beta0));
            }
            beta0
        }
        Err(_) => {
            let (beta, min_residual, status) = phase_one(a_rho, &problem.b, config)?;
            if status != SolverStatus::Optimal {
                return Ok(LpSolution {
                    objective: linalg::norm1(&beta),
                    max_residual: problem.residual(&beta),
                    beta,
                    iterations: 0,
                    duality_gap: f64::INFINITY,
                    status,
                });
            }
            let tol = config.feas_tol.max(config.gap_tol) * (1.0 + linalg::norm_inf(&problem.b));
            if min_residual > lambda + tol {
                return Err(SolverError::Infeasible {
                    lambda,
                    min_residual,
                });
            }
            if lambda == 0.0 {
                return Err(SolverError::InvalidProblem(
                    "lambda = 0 needs a nonsingular constraint matrix".into(),
                ));
            }
            beta
        }
    };

    let mut x0 = beta0.clone();
    x0.extend(beta0.iter().map(|b| b.abs() + 1.0));
    let z0 = initial_dual(&program, &x0);
    let outcome = ipm::mehrotra(&program, x0, z0, config);
    let beta = outcome.x[..p].to_vec();
    Ok(LpSolution {
        objective: linalg::norm1(&beta),
        max_residual: problem.residual(&beta),
        beta,
        iterations: outcome.iterations,
        duality_gap: outcome.relative_gap,
        status: outcome.status,
    })
}

// Dual point satisfying Gᵀz + c = 0 exactly: z1 = z2 = 1/2 and z3 = z4 = τ,
// with τ chosen so the residual-constraint products s·z match the
// magnitude of the bound-constraint ones.
fn initial_dual(program: &LpdProgram, x0: &[f64]) -> Vec<f64> {
    let p = program.dim();
    let slack = program.constraint_values(x0);
    let bound_mean = slack[..2 * p].iter().map(|g| -0.5 * g).sum::<f64>() / (2 * p) as f64;
    let resid_mean = slack[2 * p..].iter().map(|g| (-g).max(1e-12)).sum::<f64>() / (2 * p) as f64;
    let tau = (bound_mean / resid_mean).clamp(1e-8, 1e12);
    let mut z = vec![0.5; 2 * p];
    z.extend(std::iter::repeat_n(tau, 2 * p));
    z
}

// Minimizes |Aβ − b|∞. Returns the minimizer, its residual and the status.
fn phase_one(
    a: &Matrix,
    b: &[f64],
    config: &SolverConfig,
) -> Result<(Vec<f64>, f64, SolverStatus), SolverError> {
    let p = b.len();
    let mut g = Matrix::zeros(2 * p, p + 1);
    let mut h = vec![0.0; 2 * p];
    for k in 0..p {
        for j in 0..p {
            g[(k, j)] = -a[(k, j)];
            g[(p + k, j)] = a[(k, j)];
        }
        g[(k, p)] = -1.0;
        g[(p + k, p)] = -1.0;
        h[k] = -b[k];
        h[p + k] = b[k];
    }
    let mut c = vec![0.0; p + 1];
    c[p] = 1.0;
    let lp = DenseLp { g, c, h };

    let beta0 = linalg::pseudo_inverse(a, linalg::DEFAULT_RANK_TOL)?.mul_vec(b);
    let resid0 = linalg::norm_inf(&linalg::sub(&a.mul_vec(&beta0), b));
    let mut x0 = beta0;
    x0.push(resid0 + 1.0);
    let z0 = vec![0.5 / p as f64; 2 * p];
    let out = ipm::mehrotra(&lp, x0, z0, config);
    let beta = out.x[..p].to_vec();
    let resid = linalg::norm_inf(&linalg::sub(&a.mul_vec(&beta), b));
    Ok((beta, resid, out.status))
}

/// Indices `j` with `|β̂_j| > support_eps · max|β̂|` (empty when `β̂ = 0`).
pub fn support(solution: &LpSolution, config: &SolverConfig) -> Vec<usize> {
    support_of(&solution.beta, config.support_eps)
}

pub fn support_of(beta: &[f64], support_eps: f64) -> Vec<usize> {
    let max = linalg::norm_inf(beta);
    if max == 0.0 {
        return Vec::new();
    }
    let cut = support_eps * max;
    beta.iter()
        .enumerate()
        .filter(|(_, v)| v.abs() > cut)
        .map(|(j, _)| j)
        .collect()
}
