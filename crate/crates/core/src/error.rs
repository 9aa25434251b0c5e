use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Invalid user-supplied configuration (mesh sizes, parameter ranges, run settings).
    #[error("configuration error: {0}")]
    Config(String),

    #[error("assembly error: {0}")]
    Assembly(String),

    /// A full-order or reduced solve failed at a given parameter vector.
    #[error("solver error at mu = {mu:?}: {msg}")]
    Solver { mu: Vec<f64>, msg: String },

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// Parameter outside the admissible domain of a problem.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("missing data: {0}")]
    Missing(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn solver(mu: &[f64], msg: impl Into<String>) -> Self {
        Error::Solver {
            mu: mu.to_vec(),
            msg: msg.into(),
        }
    }
}
