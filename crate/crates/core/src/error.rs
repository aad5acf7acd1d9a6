use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not positive definite (pivot {pivot} at index {index})")]
    NotPositiveDefinite { index: usize, pivot: f64 },

    #[error("point is not strictly feasible for the matrix inequality")]
    NotStrictlyFeasible,

    #[error("matrix inequality is infeasible (best phase-I level {level:e})")]
    Infeasible { level: f64 },

    #[error("eigenvalue iteration failed to converge: {0}")]
    EigenFailure(String),

    #[error("input {value} is within the singularity guard of {limit}")]
    NearSingularInput { value: f64, limit: f64 },

    #[error("I + (∂f/∂u)·K_d is singular or ill-conditioned (condition {condition:e})")]
    SingularIKd { condition: f64 },

    #[error("integration produced a non-finite value at step {step}")]
    IntegrationBlowup { step: usize, state: Vec<f64> },

    #[error("simulation failed at step {step}: {source}")]
    AtStep {
        step: usize,
        state: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error("csv: {0}")]
    Csv(String),
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Csv(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Csv(e.to_string())
    }
}
