use thiserror::Error;

/// Errors produced by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    /// Input data violates a numerical precondition (non-finite values,
    /// non-Hermitian or non-unitary operators, ...).
    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// An argument is outside its allowed domain.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An iterative solver did not converge; carries the energy trace.
    #[error("no convergence after {sweeps} sweeps (last energies: {energies:?})")]
    Convergence { sweeps: usize, energies: Vec<f64> },

    /// Accumulated truncation error exceeded the configured budget.
    #[error(
        "truncation budget exceeded: cumulative discarded weight {cumulative:e} > budget {budget:e} \
         (increase chi_max or decrease svd_eps)"
    )]
    BudgetExceeded { cumulative: f64, budget: f64 },

    /// Non-finite amplitudes, step-size underflow and similar breakdowns.
    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    /// A dense engine was asked for more sites than it can hold.
    #[error("capacity exceeded: {sites} sites requested, at most {max} supported")]
    Capacity { sites: usize, max: usize },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("singular fit: {0}")]
    SingularFit(String),

    #[error("linear algebra backend: {0}")]
    Backend(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ndarray_linalg::error::LinalgError> for Error {
    fn from(e: ndarray_linalg::error::LinalgError) -> Self {
        Error::Backend(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
