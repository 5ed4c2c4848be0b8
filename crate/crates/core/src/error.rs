use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("fit error: {0}")]
    Fit(String),
    #[error("uncertainty set error: {0}")]
    Uncertainty(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("solver limit: {0}")]
    SolverLimit(String),
    #[error(transparent)]
    Solver(#[from] greenwave_milp::MilpError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
