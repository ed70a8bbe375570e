use thiserror::Error;

use crate::io::IoError;
use crate::l1solver::SolverError;
use crate::linalg::LinalgError;
use crate::stats::DataError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Io(#[from] IoError),
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{0}` needs ground truth, which is only available in simulations")]
    NeedsGroundTruth(&'static str),
    #[error("discriminant direction is zero, the rate is undefined")]
    ZeroBeta,
    #[error("no λ in the grid could be fitted on every fold")]
    NoEligibleLambda,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
