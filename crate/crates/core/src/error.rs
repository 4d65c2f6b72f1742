use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not Hermitian (‖M − M†‖_F = {0:.3e})")]
    NotHermitian(f64),

    #[error("matrix has eigenvalue {0:.3e} below the positivity tolerance")]
    NegativeEigenvalue(f64),

    #[error("invalid POVM: {0}")]
    InvalidPovm(String),

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("invalid channel: {0}")]
    InvalidChannel(String),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("kernel is not stochastic: {0}")]
    NotStochastic(String),

    #[error("channel has no outcome partition")]
    MissingPartition,

    #[error("dilation is not minimal: spanning set has rank {rank}, dilation dimension {dim}")]
    NotMinimal { rank: usize, dim: usize },

    #[error("dilations do not describe the same observable (intertwining residual {0:.3e})")]
    DilationMismatch(f64),

    #[error("first marginal of the joint observable differs from A by {0:.3e}")]
    MarginalMismatch(f64),

    #[error("necessary condition fails: Σ targets differs from the input marginal by {0:.3e}")]
    NecessaryCondition(f64),

    #[error("feasibility not established: {0}")]
    NotFeasible(String),

    #[error("unsupported problem size: {0}")]
    Unsupported(String),
}
