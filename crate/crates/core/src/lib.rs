//! Sparse linear discriminant analysis by direct estimation of the
//! discriminant direction.
//!
//! The LPD rule estimates `β = Ωδ` (precision matrix times mean difference)
//! as the minimum-ℓ1 vector satisfying `|Σ̂β − δ̂|∞ ≤ λ`, solved as a linear
//! program with a primal-dual interior-point method, and classifies `z` to
//! class 1 iff `(z − μ̂)ᵀβ̂ ≥ 0`.
//!
//! Module map:
//! - [`linalg`]: dense matrices, Cholesky, symmetric eigen, pseudo-inverse.
//! - [`stats`]: datasets, two-sample moments, variance and t-statistic screening.
//! - [`l1solver`]: the constrained ℓ1 program and its interior-point solver.
//! - [`classifier`]: LPD and baseline rules, multi-class extension.
//! - [`methods`]: named registry of fitting strategies used by the benchmark and CLI.
//! - [`model_selection`]: fold construction and λ cross-validation.
//! - [`simulation`]: Models 1-3, Gaussian / t5 sampling, replicated benchmarks.
//! - [`io`]: CSV datasets, model files, report tables.
//! - [`cli`]: command-line entry point.

pub mod classifier;
pub mod cli;
pub mod error;
pub mod io;
pub mod l1solver;
pub mod linalg;
pub mod methods;
pub mod model_selection;
pub mod simulation;
pub mod stats;

pub use classifier::{LpdModel, MultiClassLpdModel};
pub use error::{Error, Result};
pub use l1solver::{LpProblem, LpSolution, SolverConfig, SolverStatus};
pub use linalg::Matrix;
pub use stats::{LabeledDataset, TwoSampleMoments};
