use thiserror::Error;

pub type Result<T> = std::result::Result<T, GarError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GarError {
    #[error("node {0} is isolated (zero degree)")]
    IsolatedNode(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("eigenvalue pair ({i}, {j}) sums to {sum:e}; the Sylvester system is singular")]
    SingularPair { i: usize, j: usize, sum: f64 },

    #[error("shifted eigenvalue {0:e} is not positive")]
    NonPositiveEigen(f64),

    #[error("objective became non-finite at iteration {0}")]
    NonFiniteObjective(usize),

    #[error("Schur complement {0:e} of the bordered system is not positive")]
    SchurSingular(f64),

    #[error("largest eigenvalue of the sample covariance is {0:e}")]
    DegenerateCovariance(f64),

    #[error("theta0 * I + L is not positive definite (smallest eigenvalue {0:e})")]
    NonPd(f64),

    #[error("no tuning cell converged")]
    AllCellsFailed,

    #[error("could not draw a graph without isolated nodes in {0} attempts")]
    ResampleBudgetExceeded(usize),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}
