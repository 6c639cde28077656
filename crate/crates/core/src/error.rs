use thiserror::Error;

/// Errors produced by grid construction, operator validation, interface
/// coupling, solves, and experiment configuration.
#[derive(Debug, Error)]
pub enum Error {
    #[error("grid: {0}")]
    Grid(String),
    #[error("field: {0}")]
    Field(String),
    #[error("operator: {0}")]
    Operator(String),
    #[error("interface: {0}")]
    Interface(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error("envelope: {0}")]
    Envelope(String),
    #[error("estimate: {0}")]
    Estimate(String),
    #[error("hopf: {0}")]
    Hopf(String),
    #[error("config: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
